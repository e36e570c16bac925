import pytest

streamlit_testing = pytest.importorskip("streamlit.testing.v1")

APP = "../app.py"


@pytest.fixture
def app():
    at = streamlit_testing.AppTest.from_file(APP, default_timeout=60)
    return at.run()


def test_certify_page_renders(app):
    assert not app.exception
    assert any(m.value == "# Certify" for m in app.markdown)
    assert len(app.metric) == 3


def test_certify_button_runs(app):
    app.button[0].click().run()
    assert not app.exception
    assert len(app.success) + len(app.warning) + len(app.error) >= 1
    assert len(app.dataframe) >= 2


@pytest.mark.parametrize("page", ["Sweep", "Verify", "Help"])
def test_other_pages_render(app, page):
    app.sidebar.radio[0].set_value(page).run()
    assert not app.exception
    assert any(m.value == f"# {page}" for m in app.markdown)


def test_bad_eps_is_reported(app):
    app.sidebar.text_input[0].set_value("-1").run()
    assert not app.exception
    assert any("Invalid configuration" in e.value for e in app.error)

import streamlit as st
import pandas as pd
import altair as alt

from regula.config_manager import ConfigManager, resolve_theta
from regula.errors import RegulaError
from regula.iteration import run_mann
from regula.operators import BallSampler, load_catalog
from regula.rates import certify, phi
from regula.report import trace_to_frame
from regula.schedules import StepSchedule
from regula.verify import run_full_suite

# MUST be the first Streamlit command
st.set_page_config(
    page_title="Regula",
    layout="wide",
    initial_sidebar_state="expanded"
)

CHART_HORIZON = 5_000


def inject_custom_css():
    st.markdown("""
        <style>
            h1, h2, h3 {
                font-weight: 700;
                color: #000000 !important;
                letter-spacing: 1px !important;
            }

            [data-testid="stMetricValue"] {
                font-family: monospace;
                color: #800000;
            }

            button {
                border-radius: 0px !important;
                border: 1px solid #000000 !important;
                box-shadow: none !important;
            }

            #MainMenu {visibility: hidden;}
            footer {visibility: hidden;}
        </style>
    """, unsafe_allow_html=True)


inject_custom_css()

if "config_manager" not in st.session_state:
    st.session_state["config_manager"] = ConfigManager(st.session_state)
config_manager = st.session_state["config_manager"]


@st.cache_data(show_spinner=False)
def get_catalog():
    return {spec.label: spec.to_dict() for spec in load_catalog()}


def outcomes_frame(outcomes) -> pd.DataFrame:
    return pd.DataFrame([
        {"check": o.name, "ok": o.ok, "worst defect": o.worst_defect,
         "tolerance": o.tolerance, "detail": o.detail}
        for o in outcomes
    ])


# =============================================================================
# SIDEBAR: EXPERIMENT
# =============================================================================

st.sidebar.title("Navigation")
page = st.sidebar.radio("Go to", ["Certify", "Sweep", "Verify", "Help"])

st.sidebar.markdown("---")
st.sidebar.subheader("Experiment")

catalog = get_catalog()
labels = list(catalog)
current = config_manager.raw["operator"]
default_idx = next((i for i, label in enumerate(labels) if catalog[label] == current), 0)
op_label = st.sidebar.selectbox("Operator", labels, index=default_idx)
config_manager.update("operator", dict(catalog[op_label]))

try:
    base = config_manager.resolve()
except RegulaError as e:
    st.error(f"Invalid configuration: {e}")
    st.stop()

kappa = base.operator.kappa
lam_default = config_manager.raw["schedule"].get("lambda") or (1.0 + kappa) / 2.0
lam_default = round(min(max(lam_default, kappa + 0.01), 0.99), 2)
lam = st.sidebar.slider("λ (constant step)", min_value=float(kappa + 0.01), max_value=0.99,
                        value=float(lam_default), step=0.01)
eps_text = st.sidebar.text_input("ε (comma separated)", ", ".join(f"{e:g}" for e in base.eps))
theta_choice = st.sidebar.selectbox("θ", ["closed-form", "computed"])

try:
    eps_values = [float(v) for v in eps_text.split(",") if v.strip()]
    config_manager.apply_overrides(eps=eps_values, lam=lam)
    config_manager.update("theta", theta_choice)
    exp = config_manager.resolve()
except (RegulaError, ValueError) as e:
    st.error(f"Invalid configuration: {e}")
    st.stop()

st.sidebar.caption(f"κ = {exp.operator.kappa:.6g} · b = {exp.b:.6g} · {exp.operator.domain.describe()}")


# =============================================================================
# PAGES
# =============================================================================

if page == "Certify":
    st.markdown("# Certify")
    st.caption(f"{exp.operator.name} · {exp.schedule.label} · θ(n) = {exp.rate.description}")

    eps = st.selectbox("ε", exp.eps)
    bound = phi(eps, exp.b, exp.rate)

    col_m1, col_m2, col_m3 = st.columns(3)
    col_m1.metric("Φ", f"{bound:,}")
    col_m2.metric("b", f"{exp.b:.4g}")
    col_m3.metric("⌈b²/ε²⌉", f"{round(exp.b * exp.b / (eps * eps)):,}")

    if st.button("Run certification"):
        with st.spinner("Certifying..."):
            report = certify(exp.operator, exp.schedule, exp.rate, exp.x0, exp.b, eps,
                             horizon_extra=exp.config.horizon_extra, rules=exp.rules,
                             n_samples=exp.config.certify_samples,
                             sampler=BallSampler.for_operator(exp.operator, seed=exp.config.seed))

        if report.bound_holds and report.hypothesis_verified and report.checks_ok:
            st.success(f"Bound holds: r_n < {eps:g} for every n in [{report.phi}, {report.horizon}].")
        elif not report.hypothesis_verified:
            st.warning("Hypotheses unverified; see the table below.")
        else:
            st.error("Bound violated or a check failed.")

        col_a, col_b = st.columns(2)
        col_a.metric("Empirical index", "-" if report.empirical_idx is None else report.empirical_idx)
        col_b.metric("Tightness", "-" if report.tightness is None else f"{report.tightness:.2e}")

        # Residual trace on a log scale
        trace = run_mann(exp.operator, exp.schedule, exp.x0, min(report.horizon, CHART_HORIZON),
                         keep_points=False)
        df_trace = trace_to_frame(trace)
        df_trace = df_trace[df_trace["residual"] > 0]
        if not df_trace.empty:
            line = alt.Chart(df_trace).mark_line(color="#000000").encode(
                x=alt.X("n:Q", title="n"),
                y=alt.Y("residual:Q", scale=alt.Scale(type="log"), title="‖xₙ − Txₙ‖"),
                tooltip=["n", alt.Tooltip("residual:Q", format=".3e")],
            )
            rule = alt.Chart(pd.DataFrame({"eps": [eps]})).mark_rule(color="#800000").encode(y="eps:Q")
            st.altair_chart((line + rule).properties(height=300), width="stretch")
        else:
            st.caption("x0 is a fixed point; every residual is zero.")

        st.markdown("### Hypotheses")
        st.dataframe(outcomes_frame(report.hypotheses), hide_index=True)
        st.markdown("### Checks")
        st.dataframe(outcomes_frame(report.checks), hide_index=True)
        if report.near_boundary_indices:
            st.info(f"Residuals within tolerance of ε at n = {report.near_boundary_indices[:20]}")

elif page == "Sweep":
    st.markdown("# Sweep")
    st.caption("Φ against 1/ε² for each λ. For a constant step Φ is linear in 1/ε².")

    grid_text = st.text_input("λ grid", f"{lam:g}")
    try:
        grid = [float(v) for v in grid_text.split(",") if v.strip()]
    except ValueError:
        st.error("λ grid must be comma separated numbers.")
        st.stop()

    rows = []
    for g in grid:
        for eps in exp.eps:
            row = {"lambda": g, "eps": eps, "inv_eps_sq": 1.0 / (eps * eps)}
            try:
                s = StepSchedule.constant(g, exp.operator.kappa)
                row["phi"] = phi(eps, exp.b, resolve_theta(exp.config.theta, s))
            except RegulaError as e:
                row["error"] = str(e)
            rows.append(row)
    df_sweep = pd.DataFrame(rows)
    st.dataframe(df_sweep, hide_index=True)

    if "phi" in df_sweep.columns and df_sweep["phi"].notna().any():
        chart = alt.Chart(df_sweep.dropna(subset=["phi"])).mark_line(point=True).encode(
            x=alt.X("inv_eps_sq:Q", title="1/ε²"),
            y=alt.Y("phi:Q", title="Φ"),
            color=alt.Color("lambda:N", title="λ"),
            tooltip=["lambda", "eps", "phi"],
        ).properties(height=300)
        st.altair_chart(chart, width="stretch")

elif page == "Verify":
    st.markdown("# Verify")
    st.caption("Inequality oracles on sampled points and on the orbit of x0.")
    n_samples = st.number_input("Samples", min_value=100, max_value=100_000,
                                value=min(exp.config.n_samples, 2_000), step=100)
    if st.button("Run suite"):
        with st.spinner("Running checks..."):
            outcomes = run_full_suite(exp.operator, exp.schedule, exp.x0, exp.b, exp.eps[0],
                                      sampler=BallSampler.for_operator(exp.operator, seed=exp.config.seed),
                                      n_samples=int(n_samples), rate=exp.rate, rules=exp.rules)
        failed = [o.name for o in outcomes if not o.ok]
        if failed:
            st.error(f"Failed: {', '.join(failed)}")
        else:
            st.success(f"All {len(outcomes)} checks passed.")
        st.dataframe(outcomes_frame(outcomes), hide_index=True)

elif page == "Help":
    st.markdown("# Help")
    st.markdown("""
    **Iteration.** x₍ₙ₊₁₎ = λₙ xₙ + (1 − λₙ) T xₙ with κ < λₙ < 1, where T is a κ-strict
    pseudo-contraction: ‖Tx − Ty‖² ≤ ‖x − y‖² + κ‖(x − Tx) − (y − Ty)‖².

    **Bound.** With aₙ = (λₙ − κ)(1 − λₙ) and θ a rate of divergence for Σ aₙ,
    every n ≥ Φ = θ(⌈b²/ε²⌉) has ‖xₙ − Txₙ‖ < ε, provided ‖x₀ − Tx₀‖ ≤ b and T has
    approximate fixed points within b of x₀.

    **Pages.**
    - *Certify* runs the iteration to Φ and checks the bound plus the descent inequalities.
    - *Sweep* tabulates Φ over ε and λ.
    - *Verify* runs every check in the suite.

    The command line does the same and writes its artifacts to disk:
    `python -m regula certify --config my_experiment.json`.
    """)

"""
ConvBound Dashboard - lowered convolution norms and generalization bound comparison
Interactive view over the ConvBound library
"""

import pandas as pd
import streamlit as st

from lib import config
from lib.bound_zoo import REPORT_NOTE, architecture_comparison
from lib.bundle import ARCHITECTURES, architecture_spec, gen_weights, load_bundle
from lib.database import list_reports, list_verify_runs, save_report, save_verify_run
from lib.errors import ConvBoundError
from lib.types import NormMode
from lib.verify import run_suite

st.set_page_config(
    page_title="ConvBound",
    page_icon="📐",
    layout="wide",
    initial_sidebar_state="expanded",
    menu_items={
        'Get Help': None,
        'Report a bug': None,
        'About': "# ConvBound\nNorm bounds for lowered convolutions and generalization bound comparisons."
    }
)

SOURCE_LABELS = {
    'mobilenet_v1': "MobileNet-V1 shape (27 layers)",
    'mobilenet_v2': "MobileNet-V2 shape (52 layers)",
    'worked_example': "Worked example (3x4 input, 2x2 filter)",
    'mixed': "Small mixed FC/conv net",
    'bundle': "Bundle file",
}


def load_custom_css():
    """Tighten table spacing and style the section headers"""
    st.markdown("""
    <style>
    .main-header {
        color: #2C3E50;
        font-size: clamp(1.8rem, 4vw, 2.6rem);
        font-weight: 700;
        margin: 0.5rem 0 0.25rem 0;
    }
    .report-note {
        color: #5D6D7E;
        font-size: 0.9rem;
        font-style: italic;
    }
    </style>
    """, unsafe_allow_html=True)


def init_session_state():
    """Initialize session state variables"""
    if 'initialized' not in st.session_state:
        st.session_state.initialized = True
        st.session_state.report = None
        st.session_state.bundle_label = None
        st.session_state.verify_results = None


def load_network(source: str, seed: int, scale: str, bundle_path: str):
    """The chosen bundle, generated or read from disk, plus a label for it"""
    if source == 'bundle':
        return load_bundle(bundle_path), bundle_path
    return gen_weights(architecture_spec(source), seed, scale), f"{source} seed={seed} scale={scale}"


def norms_frame(report) -> pd.DataFrame:
    return pd.DataFrame([
        {
            'layer': i,
            'kind': layer.kind.value,
            'a': layer.a,
            's': layer.s,
            'n21': layer.n21,
            'gamma_fnorm': layer.gamma_fnorm,
            'd_in': layer.d_in,
            'd_out': layer.d_out,
        }
        for i, layer in enumerate(report.layers, start=1)
    ])


def bounds_frame(report) -> pd.DataFrame:
    return pd.DataFrame([
        {'family': b.family.value, 'value': b.value, 'log10': b.log10_value, 'overflow': b.overflow}
        for b in report.bounds
    ])


def show_comparison():
    report = st.session_state.report
    if report is None:
        st.info("Pick a network in the sidebar and press **Compare bounds**.")
        return

    st.markdown(f"**{st.session_state.bundle_label}** ({report.mode.value} norms"
                f"{', n ignored' if report.ignore_n else f', n = {report.n}'})")
    frame = bounds_frame(report)
    col1, col2 = st.columns([2, 3])
    with col1:
        st.dataframe(frame, hide_index=True, use_container_width=True)
    with col2:
        st.bar_chart(frame.set_index('family')['log10'])
    st.markdown(f"<p class='report-note'>{REPORT_NOTE}</p>", unsafe_allow_html=True)

    if st.button("💾 Save report", key="save_report"):
        report_id = save_report(report, st.session_state.bundle_label)
        st.success(f"Saved report {report_id}")


def show_norms():
    report = st.session_state.report
    if report is None:
        st.info("Layer norms appear after a comparison.")
        return
    st.dataframe(norms_frame(report), hide_index=True, use_container_width=True)


def show_verification(source: str, seed: int, scale: str, bundle_path: str):
    trials = st.slider("Trials per property", min_value=1, max_value=200, value=20)
    if st.button("🧪 Run oracle suite", key="run_verify"):
        with st.spinner("Checking lowering operators and norm bounds..."):
            try:
                bundle, label = load_network(source, seed, scale, bundle_path)
                results = run_suite(trials, seed, None if source.startswith('mobilenet') else bundle)
            except ConvBoundError as e:
                st.error(f"❌ {e}")
                return
        save_verify_run(results, label, trials, seed)
        st.session_state.verify_results = results

    results = st.session_state.verify_results
    if results:
        frame = pd.DataFrame([
            {'property': r.name, 'trials': r.trials, 'violations': r.violations,
             'max_error': r.max_error, 'tolerance': r.tolerance, 'passed': r.passed}
            for r in results
        ])
        if all(r.passed for r in results):
            st.success("✅ Every property held")
        else:
            st.error("❌ Some properties were violated")
        st.dataframe(frame, hide_index=True, use_container_width=True)


def show_history():
    reports = list_reports(20)
    if not reports:
        st.info("No saved reports yet.")
    for report in reports:
        ranking = ' < '.join(b['family'] for b in report['bounds'])
        st.markdown(f"- `{report['created_at']}` **{report['bundle']}** ({report['mode']}): {ranking}")

    runs = list_verify_runs(10)
    if runs:
        st.markdown("#### Oracle suite runs")
        st.dataframe(pd.DataFrame([
            {'when': run['created_at'], 'bundle': run['bundle'], 'trials': run['trials'],
             'seed': run['seed'], 'passed': run['passed']}
            for run in runs
        ]), hide_index=True, use_container_width=True)


def main():
    """Main application"""
    load_custom_css()
    init_session_state()

    st.markdown("<h1 class='main-header'>📐 ConvBound</h1>", unsafe_allow_html=True)

    with st.sidebar:
        st.markdown("### Network")
        source = st.selectbox(
            "Source",
            options=list(ARCHITECTURES) + ['bundle'],
            format_func=lambda key: SOURCE_LABELS[key],
        )
        bundle_path = st.text_input("Bundle path", value="bundle.json", disabled=source != 'bundle')
        seed = int(st.number_input("Seed", min_value=0, value=config.default_seed(), step=1))
        scale = st.selectbox("Weight scale", options=['unit_frobenius', 'gaussian', 'gaussian:0.1'])

        st.markdown("### Bounds")
        mode = st.radio("Norm mode", options=[m.value for m in NormMode], index=1, horizontal=True)
        ignore_n = st.checkbox("Ignore n", value=True)
        n = int(st.number_input("Training samples n", min_value=1, value=50000, step=1000, disabled=ignore_n))

        if st.button("📊 Compare bounds", type="primary", use_container_width=True):
            with st.spinner("Computing layer norms..."):
                try:
                    bundle, label = load_network(source, seed, scale, bundle_path)
                    st.session_state.report = architecture_comparison(
                        bundle.spec, bundle.weights, NormMode(mode), ignore_n=ignore_n, n=n,
                    )
                    st.session_state.bundle_label = label
                except ConvBoundError as e:
                    st.error(f"❌ {e}")

    tab_compare, tab_norms, tab_verify, tab_history = st.tabs(
        ["📊 Comparison", "📏 Layer norms", "🧪 Verification", "🗂️ History"]
    )
    with tab_compare:
        show_comparison()
    with tab_norms:
        show_norms()
    with tab_verify:
        show_verification(source, seed, scale, bundle_path)
    with tab_history:
        show_history()


if __name__ == "__main__":
    main()

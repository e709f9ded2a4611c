"""
DSAM Whole-Body Control Dashboard
Read-only Streamlit viewer for training runs, ablations and benchmark reports
"""
import pandas as pd
import streamlit as st

from src.evaluation.metrics import HARDWARE_REFERENCE
from src.storage.run_store import RunStore

# Page configuration
st.set_page_config(
    page_title="DSAM Control",
    page_icon="🚁",
    layout="wide",
    initial_sidebar_state="expanded"
)

# Open the run index once per session
if 'store' not in st.session_state:
    store = RunStore()
    store.connect()
    store.initialize_schema()
    st.session_state.store = store

st.markdown("""
    <style>
    .main-header {
        font-size: 2.5rem;
        font-weight: 700;
        color: #58a6ff;
        margin-bottom: 0.5rem;
    }
    .sub-header {
        font-size: 1.2rem;
        color: #8b949e;
        margin-bottom: 2rem;
    }
    </style>
""", unsafe_allow_html=True)

st.markdown('<div class="main-header">🚁 DSAM Whole-Body Control</div>', unsafe_allow_html=True)
st.markdown('<div class="sub-header">Training runs, ablations and benchmark reports</div>', unsafe_allow_html=True)

# Sidebar navigation
st.sidebar.title("Navigation")
page = st.sidebar.radio(
    "Select Page",
    [
        "🏠 Home",
        "📈 Learning Curves",
        "🧬 Ablations",
        "🎯 Benchmark Reports",
        "🛩️ Trajectory Viewer",
        "⚙️ Settings"
    ]
)

if page == "🏠 Home":
    st.markdown("## Welcome")

    st.markdown("""
    A quadrotor with a two-joint differential shoulder and a gripper at the arm tip,
    controlled end to end by one learned policy: the policy maps the gripper goal pose to
    base acceleration, body-rate feedforward, yaw and joint references, and a tilt-prioritized
    INDI inner loop turns those into rotor commands.

    ### Pages

    - **📈 Learning Curves**: per-component reward, episode length and crash rate of a training run
    - **🧬 Ablations**: variants of the observation, inner loop and domain randomization on shared axes
    - **🎯 Benchmark Reports**: pose, payload, push and path results next to the flight reference
    - **🛩️ Trajectory Viewer**: gripper pose against the goal over time for any saved episode

    ### Pipeline

    ```
    configs/*.yaml
         ↓ train (PPO, vectorized environments)
    runs/<run>/policy.dsamw
         ↓ eval-pose / eval-payload / eval-push / eval-path
    runs/<run>/reports/*.csv + episodes/*.npz
         ↓ export
    plot bundle (CSV + HTML)
    ```
    """)

    runs = st.session_state.store.list_runs()
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Training Runs", sum(run["kind"] == "train" for run in runs))
    with col2:
        st.metric("Evaluations", sum(run["kind"].startswith("eval") for run in runs))
    with col3:
        st.metric("Reports", len(st.session_state.store.get_reports()))
    with col4:
        st.metric("Failed Variants", len(st.session_state.store.get_failures()))

    st.markdown("### Hardware reference")
    st.caption("Flight results, shown next to simulated numbers for context. Never used as pass/fail targets.")
    st.dataframe(pd.DataFrame(HARDWARE_REFERENCE), use_container_width=True)

elif page == "📈 Learning Curves":
    from src.ui.learning_curves import render_learning_curves
    render_learning_curves(st.session_state.store)

elif page == "🧬 Ablations":
    from src.ui.learning_curves import render_ablations
    render_ablations(st.session_state.store)

elif page == "🎯 Benchmark Reports":
    from src.ui.benchmark_viewer import render_benchmark_reports
    render_benchmark_reports(st.session_state.store)

elif page == "🛩️ Trajectory Viewer":
    from src.ui.benchmark_viewer import render_trajectory_viewer
    render_trajectory_viewer(st.session_state.store)

elif page == "⚙️ Settings":
    st.markdown("## Settings")

    st.markdown("### Runs directory")
    st.info(f"Runs root: `{st.session_state.store.root.resolve()}`")
    root = st.text_input("Open another runs directory", value=str(st.session_state.store.root))
    if st.button("📂 Open") and root != str(st.session_state.store.root):
        st.session_state.store.close()
        store = RunStore(root)
        store.connect()
        store.initialize_schema()
        st.session_state.store = store
        st.success(f"Opened {root}")
        st.rerun()

    st.markdown("### About")
    st.markdown("""
    **DSAM Whole-Body Control**
    Version: 1.0.0

    Built with:
    - NumPy / SciPy (simulation)
    - PyTorch (PPO training)
    - Pydantic + PyYAML (configuration)
    - Pandas + Plotly + Streamlit (reports)
    - SQLite (run index)
    """)

"""
Learning Curves and Ablations pages
Read training_log.csv / ablation_curves.csv of finished or running runs
"""
import json

import pandas as pd
import streamlit as st

from src.storage.run_store import RunStore
from src.training.rewards import REWARD_COMPONENTS
from src.ui.figures import reward_curves_figure, variant_overlay_figure


def _run_selector(store: RunStore, kind: str, label: str):
    runs = [run for run in store.list_runs() if run["kind"] == kind]
    if not runs:
        return None
    labels = {f"{run['run_id']} ({run['status']})": run["run_id"] for run in runs}
    return labels[st.selectbox(label, list(labels))]


def render_learning_curves(store: RunStore):
    """Per-component reward curves plus episode statistics of one training run."""
    st.markdown("## 📈 Learning Curves")

    run_id = _run_selector(store, "train", "Select training run")
    if run_id is None:
        st.warning("No training runs yet. Start one with `python -m src.cli train --config configs/smoke.yaml`.")
        return

    paths = store.run_paths(run_id)
    if not paths.training_log.exists():
        st.info("This run has not finished an iteration yet.")
        return
    log = pd.read_csv(paths.training_log)

    col1, col2, col3, col4 = st.columns(4)
    last = log.iloc[-1]
    with col1:
        st.metric("Iterations", int(last["iteration"]))
    with col2:
        st.metric("Env Steps", f"{int(last['env_steps']):,}")
    with col3:
        st.metric("Reward / step", f"{last['reward_total']:.3f}")
    with col4:
        st.metric("Crash Rate", f"{last['crash_rate']:.2%}" if pd.notna(last["crash_rate"]) else "n/a")

    components = st.multiselect("Reward components", [*REWARD_COMPONENTS, "reward_total"],
                                default=list(REWARD_COMPONENTS))
    st.plotly_chart(reward_curves_figure(log, components), use_container_width=True)

    st.markdown("### Episodes")
    col1, col2 = st.columns(2)
    with col1:
        st.line_chart(log.set_index("env_steps")[["episode_length_mean"]])
    with col2:
        st.line_chart(log.set_index("env_steps")[["crash_rate", "joint_oscillation"]])

    st.markdown("### Optimizer")
    st.line_chart(log.set_index("env_steps")[["kl", "learning_rate", "action_std"]])

    with st.expander("📄 Raw training log"):
        st.dataframe(log, use_container_width=True)


def render_ablations(store: RunStore):
    """Overlay of ablation variants, plus the variants that failed."""
    st.markdown("## 🧬 Ablations")

    run_id = _run_selector(store, "ablate", "Select ablation suite")
    if run_id is None:
        st.warning("No ablation suites yet. Run `python -m src.cli ablate --config configs/default.yaml`.")
        return

    curves_path = store.run_paths(run_id).root / "ablation_curves.csv"
    if not curves_path.exists():
        st.info("The suite has not written its curves yet.")
        return
    curves = pd.read_csv(curves_path)

    metric = st.selectbox("Metric", [*REWARD_COMPONENTS, "reward_total", "episode_length_mean",
                                     "crash_rate", "joint_oscillation"], index=1)
    st.plotly_chart(variant_overlay_figure(curves, metric), use_container_width=True)

    failures = store.get_failures(run_id)
    if failures:
        st.warning(f"{len(failures)} variant(s) failed")
        for entry in failures:
            with st.expander(f"❌ {entry['variant']} - {entry['error_type']} ({entry['failed_at']})"):
                st.markdown(f"**Error Message**: {entry['error_message']}")
                st.markdown("**Overrides**:")
                st.json(json.loads(entry["overrides"] or "{}"))
    else:
        st.success("✅ All variants finished")

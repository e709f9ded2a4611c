"""
Benchmark Reports and Trajectory Viewer pages
"""
from pathlib import Path

import pandas as pd
import streamlit as st

from src.errors import ExportError
from src.evaluation.episodes import load_episode_logs
from src.evaluation.export import episode_frame
from src.storage.run_store import RunStore
from src.ui.figures import goal_errors_figure, joints_figure, trajectory_figure


def render_benchmark_reports(store: RunStore):
    """Per-goal table and aggregates next to the hardware reference rows."""
    st.markdown("## 🎯 Benchmark Reports")

    reports = store.get_reports()
    if not reports:
        st.warning("No reports yet. Run one of the `eval-*` commands first.")
        return

    labels = {f"{r['run_id']} · {r['task']} ({r['created_at']})": r for r in reports}
    entry = labels[st.selectbox("Select report", list(labels))]
    summary_path = Path(entry["path"])
    goals_path = summary_path.with_name(summary_path.name.replace("_summary.csv", "_goals.csv"))
    if not summary_path.exists():
        st.error(f"Report file missing: `{summary_path}`")
        return

    summary = pd.read_csv(summary_path)
    simulated = summary[summary["source"] == "simulation"].iloc[0]

    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Success", f"{int(simulated['success_count'])}/{int(simulated['goal_count'])}")
    with col2:
        st.metric("Position Error", f"{simulated['position_error_mean']:.4f} m")
    with col3:
        st.metric("Orientation Error", f"{simulated['orientation_error_mean_deg']:.2f}°")
    with col4:
        st.metric("Crashed", int(simulated["crashed_count"]))

    st.markdown("### Simulation vs hardware reference")
    st.caption("Hardware rows are flight results shown for context only.")
    st.dataframe(summary.dropna(axis=1, how="all"), use_container_width=True)

    if goals_path.exists():
        goals = pd.read_csv(goals_path)
        st.markdown("### Per goal")
        st.plotly_chart(goal_errors_figure(goals), use_container_width=True)
        st.dataframe(goals, use_container_width=True)


def render_trajectory_viewer(store: RunStore):
    """Gripper pose against the goal over time, from saved episode logs."""
    st.markdown("## 🛩️ Trajectory Viewer")

    archives = sorted(store.root.glob("*/episodes/*_episodes.npz"))
    if not archives:
        st.warning("No episode logs yet. Benchmarks save them under `<run>/episodes/`.")
        return

    choice = st.selectbox("Episode log", archives, format_func=lambda p: f"{p.parent.parent.name} · {p.stem}")
    try:
        archive = load_episode_logs(choice)
    except ExportError as exc:
        st.error(str(exc))
        return

    index = st.number_input("Episode", min_value=0, max_value=len(archive.logs) - 1, value=0, step=1)
    log = archive.logs[int(index)]
    if log.crashed:
        st.error(f"❌ Episode crashed after {log.num_steps} steps")
    frame = episode_frame(log)

    st.plotly_chart(trajectory_figure(frame, title=f"{archive.task} episode {int(index)}"),
                    use_container_width=True)
    st.plotly_chart(joints_figure(frame), use_container_width=True)
    if frame["box_x"].notna().any():
        st.markdown("### Box")
        st.line_chart(frame.set_index("time")[["box_x", "ee_x"]])

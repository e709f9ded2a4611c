"""
Plotly figures shared by the dashboard pages and the plot bundle export.
"""
from typing import Iterable, Optional

import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

REWARD_COLORS = {
    "r_pos": "#58a6ff",
    "r_ori": "#ffdd86",
    "r_ds": "#8bffb0",
    "r_js": "#ff9ead",
    "r_dmag": "#d2a8ff",
    "reward_total": "#f0f6fc",
}


def trajectory_figure(frame: pd.DataFrame, title: Optional[str] = None) -> go.Figure:
    """
    Gripper position and quaternion against the commanded pose.

    frame: one episode in the plot-bundle schema (time, ee_*, goal_*, ...)
    """
    fig = make_subplots(rows=2, cols=1, shared_xaxes=True, vertical_spacing=0.08,
                        subplot_titles=("Position [m]", "Orientation (quaternion)"))
    for axis, color in zip("xyz", ("#58a6ff", "#8bffb0", "#ff9ead")):
        fig.add_trace(go.Scatter(x=frame["time"], y=frame[f"ee_{axis}"], name=f"ee {axis}",
                                 line=dict(color=color)), row=1, col=1)
        fig.add_trace(go.Scatter(x=frame["time"], y=frame[f"goal_{axis}"], name=f"goal {axis}",
                                 line=dict(color=color, dash="dash")), row=1, col=1)
    for part, color in zip(("qw", "qx", "qy", "qz"), ("#f0f6fc", "#58a6ff", "#8bffb0", "#ff9ead")):
        fig.add_trace(go.Scatter(x=frame["time"], y=frame[f"ee_{part}"], name=f"ee {part}",
                                 line=dict(color=color)), row=2, col=1)
        fig.add_trace(go.Scatter(x=frame["time"], y=frame[f"goal_{part}"], name=f"goal {part}",
                                 line=dict(color=color, dash="dash")), row=2, col=1)
    fig.update_xaxes(title_text="time [s]", row=2, col=1)
    fig.update_layout(title=title, template="plotly_dark", height=650, legend=dict(orientation="h"))
    return fig


def joints_figure(frame: pd.DataFrame) -> go.Figure:
    fig = go.Figure()
    for i, color in ((1, "#58a6ff"), (2, "#ff9ead")):
        fig.add_trace(go.Scatter(x=frame["time"], y=frame[f"theta_{i}"], name=f"theta {i}",
                                 line=dict(color=color)))
        fig.add_trace(go.Scatter(x=frame["time"], y=frame[f"joint_ref_{i}"], name=f"reference {i}",
                                 line=dict(color=color, dash="dot")))
    fig.update_layout(template="plotly_dark", xaxis_title="time [s]", yaxis_title="joint angle [rad]")
    return fig


def reward_curves_figure(log: pd.DataFrame, components: Iterable[str]) -> go.Figure:
    """Per-component mean step reward against environment steps."""
    fig = go.Figure()
    for name in components:
        fig.add_trace(go.Scatter(x=log["env_steps"], y=log[name], name=name,
                                 line=dict(color=REWARD_COLORS.get(name))))
    fig.update_layout(template="plotly_dark", xaxis_title="environment steps",
                      yaxis_title="mean reward per step")
    return fig


def variant_overlay_figure(curves: pd.DataFrame, column: str) -> go.Figure:
    """One line per ablation variant on shared axes."""
    fig = go.Figure()
    for variant, group in curves.groupby("variant", sort=False):
        fig.add_trace(go.Scatter(x=group["env_steps"], y=group[column], name=str(variant)))
    fig.update_layout(template="plotly_dark", xaxis_title="environment steps", yaxis_title=column)
    return fig


def goal_errors_figure(goals: pd.DataFrame) -> go.Figure:
    """Per-goal position and orientation error bars (mean with std)."""
    fig = make_subplots(rows=1, cols=2, subplot_titles=("Position error [m]", "Orientation error [deg]"))
    fig.add_trace(go.Bar(x=goals["goal_index"], y=goals["position_error_mean"],
                         error_y=dict(type="data", array=goals["position_error_std"]),
                         marker_color="#58a6ff", name="position"), row=1, col=1)
    fig.add_trace(go.Bar(x=goals["goal_index"], y=goals["orientation_error_mean_deg"],
                         error_y=dict(type="data", array=goals["orientation_error_std_deg"]),
                         marker_color="#ffdd86", name="orientation"), row=1, col=2)
    fig.update_layout(template="plotly_dark", showlegend=False)
    return fig

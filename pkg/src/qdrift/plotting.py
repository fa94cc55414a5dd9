"""Line-chart SVGs with byte-stable output."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_SALT = "qdrift"


def line_chart_svg(x_series, y_series, labels, title: str, xlabel: str, ylabel: str) -> str:
    """Overlay of (x, y) series as an SVG string; identical inputs give identical bytes."""
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path",
                                "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(7.0, 4.2))
        for x, y, lab in zip(x_series, y_series, labels):
            ax.plot(x, y, lw=1.4, label=lab)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()

"""Static SVG line/scatter plots from result documents.

A result document carries a ``plot`` block::

    {"title": str, "x_label": str, "y_label": str,
     "xscale": "linear" | "log", "yscale": "linear" | "log",
     "series": [{"label": str, "x": [...], "y": [...], "style": "points" | "line"}]}

Output is deterministic for identical input (fixed hash salt, no date).
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ValidationError  # noqa: E402

_SCALES = ("linear", "log")


def plot_block(title, x_label, y_label, series, xscale="linear", yscale="linear"):
    return {"title": title, "x_label": x_label, "y_label": y_label,
            "xscale": xscale, "yscale": yscale, "series": series}


def series(label, x, y, style="points"):
    return {"label": label, "x": [float(v) for v in x], "y": [float(v) for v in y],
            "style": style}


def render_svg(block, path):
    """Write the plot block to ``path`` as SVG."""
    if not isinstance(block, dict) or "series" not in block:
        raise ValidationError("result document has no plot block")
    xs, ys = block.get("xscale", "linear"), block.get("yscale", "linear")
    if xs not in _SCALES or ys not in _SCALES:
        raise ValidationError("plot scales must be 'linear' or 'log'")
    with plt.rc_context({"svg.hashsalt": "cavchar", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        try:
            for s in block["series"]:
                if s.get("style", "points") == "line":
                    ax.plot(s["x"], s["y"], "-", lw=1.5, label=s.get("label"))
                else:
                    ax.plot(s["x"], s["y"], "o", ms=3, label=s.get("label"))
            ax.set_xscale(xs)
            ax.set_yscale(ys)
            ax.set_xlabel(block.get("x_label", ""))
            ax.set_ylabel(block.get("y_label", ""))
            ax.set_title(block.get("title", ""))
            if any(s.get("label") for s in block["series"]):
                ax.legend(frameon=False)
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)

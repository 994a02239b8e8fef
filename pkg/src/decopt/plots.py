"""Figure rendering for experiment reports.

Figures land next to the CSV output: max-node error against iterations
and against cumulative transmitted bits, one curve per quantizer.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _curves(result, x_field):
    """One (label, x, y) per quantizer, first seed with a usable trace."""
    seen = {}
    for cell in result.cells:
        label = cell.quantizer.label()
        if label in seen or cell.trace is None:
            continue
        x = cell.trace.iters if x_field == "iter" else cell.trace.bits_cum
        seen[label] = (x, cell.trace.max_err)
    return seen


def render_error_curves(result, out_dir, stem=None):
    """Write <stem>-error-vs-iter.png and <stem>-error-vs-bits.png; returns the paths."""
    stem = stem or result.spec.name
    paths = []
    for x_field, xlabel in (("iter", "iteration"), ("bits", "transmitted bits")):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, (x, y) in _curves(result, x_field).items():
            positive = y > 0
            ax.semilogy(x[positive], y[positive], label=label, linewidth=1.4)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("max node error")
        ax.set_title(result.spec.name)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        path = f"{out_dir}/{stem}-error-vs-{x_field}.png"
        fig.savefig(path, dpi=130, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths

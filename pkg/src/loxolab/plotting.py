"""Optional figures for experiment reports (matplotlib, imported lazily)."""

import math

# experiment -> (x column, y columns, log y, error column or None)
PLOTS = {
    "genericity": ("n", ["frac_displacement", "frac_tau", "frac_loxodromic"], False, None),
    "shadows": ("r", ["hit_prob", "counting_mass"], True, "se"),
    "converge": ("checkpoint", ["median", "mean", "q10"], False, None),
    "returns": ("k", ["prob"], True, "se"),
    "spectral": ("vertex", ["rho"], False, None),
    "measure": ("n", ["ratio"], False, None),
    "drift": ("n", ["mean"], False, "se"),
    "translation": ("n", ["fraction"], False, "se"),
    "gromov": ("statistic", ["frac_below"], False, None),
}


def _numeric(v):
    try:
        x = float(v)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


def plot_report(report, path):
    """Render a report to ``path`` (format from the extension)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x_col, y_cols, logy, err = PLOTS.get(report.name, (report.columns[0], None, False, None))
    if y_cols is None:
        y_cols = [c for c in report.columns[1:]
                  if all(_numeric(v) is not None for v in report.column(c))][:3]
    xs = report.column(x_col)
    categorical = any(_numeric(v) is None for v in xs)
    pos = list(range(len(xs))) if categorical else [float(v) for v in xs]
    fig, ax = plt.subplots(figsize=(6, 4))
    for c in y_cols:
        if c not in report.columns:
            continue
        ys = [_numeric(v) for v in report.column(c)]
        pts = [(p, y) for p, y in zip(pos, ys) if y is not None and (y > 0 or not logy)]
        if not pts:
            continue
        px, py = zip(*pts)
        if err and c == y_cols[0] and err in report.columns:
            es = [_numeric(v) or 0.0 for v, y in zip(report.column(err), ys)
                  if y is not None and (y > 0 or not logy)]
            ax.errorbar(px, py, yerr=[3 * e for e in es], marker="o", capsize=3, label=c)
        elif c == y_cols[0]:
            ax.plot(px, py, marker="o", label=c)
        else:
            ax.plot(px, py, marker="s", linestyle="--", fillstyle="none", label=c)
    if categorical:
        ax.set_xticks(pos)
        ax.set_xticklabels([str(v) for v in xs], rotation=30, ha="right")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x_col)
    ax.set_title(report.name)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path

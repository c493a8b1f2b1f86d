"""Static figures for the experiment reports (Agg backend, PNG files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_report(report: dict, path: str | Path) -> Path | None:
    """Render the figure for one experiment report; ``None`` when there is nothing to draw."""
    kind = report["experiment"]
    rows = report.get("rows", [])
    if not rows:
        return None
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        col = lambda name: np.array([r[name] for r in rows], dtype=float)
        if kind == "sharpness-k":
            lam = col("lambda")
            ax.loglog(lam, col("value"), "o-", label="form value")
            ax.loglog(lam, col("target_value"), "s--", label="2 lambda^2 / 21")
            ax.set_xlabel("lambda")
            ax.set_ylabel("value")
            ax.legend()
        elif kind == "sharpness-theta":
            c = col("charConst")
            ax.loglog(c, col("normalized"), "o-", label="normalised form")
            ax.loglog(c, col("form_value"), "s--", label="raw form")
            ax.set_xlabel("weight constant")
            ax.set_ylabel("value")
            ax.legend()
        elif kind == "reduce-fuzz":
            ax.hist(col("margin"), bins=40)
            ax.set_xlabel("relative margin (rhs - lhs) / rhs")
            ax.set_ylabel("count")
        elif kind == "dominate-demo":
            for case in sorted({r["case"] for r in rows}):
                sub = [r for r in rows if r["case"] == case]
                ax.plot([r["L"] for r in sub], [r["C_emp"] for r in sub], "o-", label=case)
            ax.set_xlabel("L")
            ax.set_ylabel("C_emp")
            ax.legend()
        elif kind == "maximal-equiv":
            d = col("delta")
            for name in ("charConst", "weakEst", "strongEst", "formEst"):
                ax.plot(d, col(name), "o-", label=name)
            ax.set_xlabel("delta")
            ax.legend()
        elif kind == "weights-report":
            sub = [r for r in rows if r["quantity"] == "ap_constant"]
            if not sub:
                plt.close(fig)
                return None
            ax.plot(range(len(sub)), [r["value"] for r in sub], "o-")
            ax.set_xticks(range(len(sub)), [r["setting"] for r in sub], rotation=30, fontsize=7)
            ax.set_ylabel("A_p constant")
        else:
            plt.close(fig)
            return None
        ax.set_title(kind)
        return _save(fig, path)

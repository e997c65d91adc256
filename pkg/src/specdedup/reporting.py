"""Render the run's summary figures next to the delimited reports.

Two figures mirror the analyses a curator inspects first: counts per
assessment-flag combination, and the duplicate group size distribution.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .assess import ALL_CELLS, FlagCellCounts


def render_figures(
    out_dir: str | Path, cells: FlagCellCounts, size_histogram: dict[int, int]
) -> list[Path]:
    out_dir = Path(out_dir)
    written = [
        render_flag_combinations(out_dir / "flag_combinations.png", cells),
        render_group_sizes(out_dir / "group_sizes.png", size_histogram),
    ]
    return written


def _cell_label(cell: tuple[bool, bool, bool]) -> str:
    marks = "".join("T" if flag else "F" for flag in cell)
    return marks


def render_flag_combinations(path: Path, cells: FlagCellCounts) -> Path:
    """Grouped bar chart of group/record counts per flag combination."""
    labels = [_cell_label(cell) for cell in ALL_CELLS]
    group_counts = [cells.cells[cell].group_count for cell in ALL_CELLS]
    record_counts = [cells.cells[cell].record_count for cell in ALL_CELLS]
    x = range(len(labels))
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.4
    ax.bar([i - width / 2 for i in x], group_counts, width=width, label="groups")
    ax.bar([i + width / 2 for i in x], record_counts, width=width, label="records")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_xlabel("countrycode / order / family agreement")
    ax.set_ylabel("count")
    ax.set_title("Assessment flag combinations")
    if any(group_counts) or any(record_counts):
        ax.set_yscale("symlog")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_group_sizes(path: Path, size_histogram: dict[int, int]) -> Path:
    """Bar chart of duplicate group sizes."""
    sizes = sorted(size_histogram)
    counts = [size_histogram[s] for s in sizes]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar([str(s) for s in sizes], counts)
    ax.set_xlabel("group size")
    ax.set_ylabel("number of groups")
    ax.set_title("Duplicate group sizes")
    if counts:
        ax.set_yscale("symlog")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path

import logging

from typing import Sequence

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from matplotlib.colors import ListedColormap  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from constants import (  # noqa: E402
    FIGURE_DPI, HEAT_CMAP, INCHES_PER_CELL, MAX_FIGURE_INCHES, PANEL_INCHES, PATH_COLORS, ROAD_COLOR,
    SEARCH_CMAP, START_COLOR, SVG_HASH_SALT
)
from features import RewardLandscape  # noqa: E402
from planner import VisitEntry  # noqa: E402
from world import CellPath, GridWorld, MultiplierSet, attraction_field  # noqa: E402


logger = logging.getLogger(__name__)


def _grid_figure(world: GridWorld) -> "tuple[Figure, plt.Axes]":
    '''
    A figure sized to the grid with rows running down and columns across
    '''

    scale = min(INCHES_PER_CELL, MAX_FIGURE_INCHES / max(world.rows, world.cols))
    fig, ax = plt.subplots(figsize=(max(world.cols * scale, 2.0), max(world.rows * scale, 2.0)))
    ax.set_xlim(-0.5, world.cols - 0.5)
    ax.set_ylim(world.rows - 0.5, -0.5)
    ax.set_aspect("equal")
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    return fig, ax


def _draw_roads(ax, world: GridWorld, alpha: float = 1.0):
    roads = np.ma.masked_where(~world.road_mask, np.ones(world.road_mask.shape))
    ax.imshow(roads, cmap=ListedColormap([ROAD_COLOR]), vmin=0.0, vmax=1.0, alpha=alpha, interpolation="nearest",
              gid="road")


def _save(fig: Figure, path) -> Figure:
    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "image.composite_image": False}):
        fig.savefig(path, format="svg", dpi=FIGURE_DPI, metadata={"Date": None})

    plt.close(fig)
    logger.info(f"Wrote {path}")
    return fig


def render_heatmap(world: GridWorld, m: MultiplierSet, path) -> Figure:
    '''
    Attraction of every cell on a heat scale with the road network laid over it

    :return: the rendered figure, already closed
    '''

    field = attraction_field(world, m)
    top = float(field.max())

    fig, ax = _grid_figure(world)
    image = ax.imshow(field, cmap=HEAT_CMAP, vmin=0.0, vmax=top if top > 0 else 1.0, interpolation="nearest",
                      gid="heat")
    fig.colorbar(image, ax=ax, label="attraction")
    _draw_roads(ax, world, alpha=0.35)

    return _save(fig, path)


def render_paths(world: GridWorld, paths: Sequence[CellPath], path) -> Figure:
    '''
    Paths over the road network: one marker per cell and a dot on each
    distinct start cell
    '''

    fig, ax = _grid_figure(world)
    _draw_roads(ax, world)

    starts = []
    for index, cell_path in enumerate(paths):
        if not len(cell_path):
            continue

        color = PATH_COLORS[index % len(PATH_COLORS)]
        cells = np.array(cell_path.cells, dtype=float)
        if len(cell_path) > 1:
            ax.plot(cells[:, 1], cells[:, 0], color=color, linewidth=1.5, gid=f"path-{index}")
        ax.scatter(cells[:, 1], cells[:, 0], s=12, color=color, zorder=3, gid=f"marker-{index}")

        if cell_path.start not in starts:
            starts.append(cell_path.start)

    if starts:
        points = np.array(starts, dtype=float)
        ax.scatter(points[:, 1], points[:, 0], s=60, color=START_COLOR, zorder=4, gid="start")

    return _save(fig, path)


def render_search(world: GridWorld, visit_log: Sequence[VisitEntry], path) -> Figure:
    '''
    Closed cells coloured by the order the search expanded them, early visits
    cold and late visits hot. An empty log leaves the axes alone
    '''

    fig, ax = _grid_figure(world)
    if not visit_log:
        return _save(fig, path)

    _draw_roads(ax, world, alpha=0.35)
    cells = np.array([entry.cell for entry in visit_log], dtype=float)
    order = np.array([entry.visit_index for entry in visit_log], dtype=float)
    points = ax.scatter(cells[:, 1], cells[:, 0], c=order, cmap=SEARCH_CMAP, marker="s", s=16, gid="visit")
    fig.colorbar(points, ax=ax, label="expansion order")

    return _save(fig, path)


def render_landscape(landscape: RewardLandscape, corpus: Sequence, path) -> Figure:
    '''
    One panel per landscape plane with the outer hull, the inner hull and the
    corpus points
    '''

    count = len(landscape.planes)
    fig, axes = plt.subplots(1, count, figsize=(count * PANEL_INCHES, PANEL_INCHES), squeeze=False)

    for index, (ax, plane) in enumerate(zip(axes[0], landscape.planes)):
        ax.set_gid(f"plane-{index}")
        ax.set_xlabel(plane.x_feature)
        ax.set_ylabel(plane.y_feature)

        hulls = ((plane.outer_hull, PATH_COLORS[0], "outer"), (plane.inner_hull, PATH_COLORS[1], "inner"))
        for hull, color, name in hulls:
            ring = np.array(list(hull) + [hull[0]], dtype=float)
            ax.plot(ring[:, 0], ring[:, 1], color=color, linewidth=1.5, gid=f"{name}-{index}")

        if corpus:
            points = np.array([plane.point_of(feature) for feature in corpus], dtype=float)
            ax.scatter(points[:, 0], points[:, 1], s=6, color=PATH_COLORS[2], gid=f"corpus-{index}")

    fig.tight_layout()
    return _save(fig, path)

"""Synthetic product geometries for tests, demos and the acceptance experiments.

These are hand-made stand-ins on a 50 x 50 grid. They are NOT the geometries
of any real product.
"""

from __future__ import annotations

import numpy as np

from .model import GapSpec, Product, TargetAreas

GRID = 50


def _blank():
    return np.zeros((GRID, GRID)), np.zeros((GRID, GRID))


def rectangle() -> Product:
    """30 x 20 cell cooling rectangle (600 cells) centred on the grid."""
    cool, tab = _blank()
    cool[15:35, 10:40] = 1.0
    return Product(TargetAreas.from_cool_tab(cool, tab), GapSpec(1.0), 1.0, "rectangle")


def thin_strip() -> Product:
    """3-cell wide, 30-cell long horizontal cooling strip."""
    cool, tab = _blank()
    cool[24:27, 10:40] = 1.0
    return Product(TargetAreas.from_cool_tab(cool, tab), GapSpec(1.0), 1.0, "thin-strip")


def l_shape() -> Product:
    cool, tab = _blank()
    cool[10:40, 10:22] = 1.0
    cool[28:40, 22:40] = 1.0
    return Product(TargetAreas.from_cool_tab(cool, tab), GapSpec(1.0), 1.0, "l-shape")


def taboo_islands() -> Product:
    """Cooling rectangle with two screw-hole taboo islands close to its long edges."""
    cool, tab = _blank()
    cool[15:35, 10:40] = 1.0
    tab[10:13, 23:27] = 1.0
    tab[37:40, 23:27] = 1.0
    return Product(TargetAreas.from_cool_tab(cool, tab), GapSpec(1.0), 1.0, "taboo-islands")


def border_taboo() -> Product:
    """Cooling rectangle near a taboo strip on the top border, wide gap tolerance.

    g_min is half of g_max, so the volume dispensed for the nominal gap
    roughly doubles its footprint at g_min.
    """
    cool, tab = _blank()
    cool[9:25, 15:35] = 1.0
    tab[0:3, :] = 1.0
    gap = GapSpec(g_final=0.9, g_max=1.0, g_min=0.5)
    return Product(TargetAreas.from_cool_tab(cool, tab), gap, 1.0, "border-taboo")


FIXTURES = {
    "rectangle": rectangle,
    "thin-strip": thin_strip,
    "l-shape": l_shape,
    "taboo-islands": taboo_islands,
    "border-taboo": border_taboo,
}

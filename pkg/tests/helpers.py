"""Small builders shared by several test modules."""

import numpy as np

from crossturn.alphas import PositionPanel

# Day-0 and day-1 money positions of the two alphas in the crossing example.
EXAMPLE_A1 = np.array([[0, 500, -200, -300], [100, 100, 300, -500]], dtype=float)
EXAMPLE_A2 = np.array([[250, -400, 250, -100], [200, -300, 300, -200]], dtype=float)


def position_panel(positions, name=""):
    pos = np.asarray(positions, dtype=float)
    dates = np.busday_offset(np.datetime64("2024-01-02"), np.arange(pos.shape[0]))
    tickers = tuple(f"T{i}" for i in range(pos.shape[1]))
    defined = ~np.isnan(pos).all(axis=1)
    return PositionPanel(dates, tickers, pos, defined, name=name)

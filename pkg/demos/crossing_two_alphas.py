"""
Crossing of trades between two alphas
=====================================

Two alphas hold money positions in four assets.  Traded separately they
send 1500 units of orders to the exchange over one day; combined into one
portfolio, opposite orders on the same asset cross and only 1200 remain.
"""

import numpy as np

from crossturn.alphas import PositionPanel
from crossturn.turnover import combine_positions, max_turnover, moment_turnover

dates = np.array(["2024-01-02", "2024-01-03"], dtype="datetime64[D]")
tickers = ("A", "B", "C", "D")

# yesterday's and today's positions of each alpha
a1 = PositionPanel(dates, tickers, [[0, 500, -200, -300], [100, 100, 300, -500]], [True, True])
a2 = PositionPanel(dates, tickers, [[250, -400, 250, -100], [200, -300, 300, -200]], [True, True])

tau1 = moment_turnover(a1).tau[0]
tau2 = moment_turnover(a2).tau[0]
print("alpha turnovers:", tau1, tau2)

# without crossing every order is executed on its own
print("no crossing:", max_turnover([tau1, tau2], [1, 1]))

# the portfolio sums positions asset by asset
portfolio = combine_positions([a1, a2], [1, 1])
print("portfolio positions:\n", portfolio.positions)
print("with crossing:", moment_turnover(portfolio).tau[0])

# trades per asset: the second asset is where most orders cancel
trades = np.diff(np.stack([a1.positions, a2.positions]), axis=1)[:, 0]
print("per-alpha trades:\n", trades)
print("net trades:", trades.sum(axis=0))

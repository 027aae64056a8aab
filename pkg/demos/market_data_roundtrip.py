"""
Reading daily OHLCV CSV files
=============================

A directory holds one CSV per ticker.  Dates are intersected across
tickers, interior gaps are carried forward from the previous close with zero
volume, and malformed rows are reported with file and line.
"""

import tempfile
from pathlib import Path

from crossturn.market_data import DataError, compute_returns, load_panel, write_panel

root = Path(tempfile.mkdtemp())
header = "date,open,high,low,close,volume\n"
(root / "AAA.csv").write_text(
    header
    + "2024-01-02,10,10.5,9.8,10.2,1200\n"
    + "2024-01-03,,,,,\n"
    + "2024-01-04,10.1,10.9,10.0,10.8,900\n"
)
(root / "BBB.csv").write_text(
    header
    + "2024-01-02,50,51,49,50.5,300\n"
    + "2024-01-03,50.5,52,50,51.7,250\n"
    + "2024-01-04,51.7,52,51,51.2,280\n"
    + "2024-01-05,51.2,51.5,50,50.1,310\n"
)

panel = load_panel(root)
print("dates:", panel.dates)
print("close:\n", panel.close)
print("volume:\n", panel.volume)
print("returns:\n", compute_returns(panel).returns)

copy = Path(tempfile.mkdtemp())
write_panel(panel, copy)
print("round trip equal:", load_panel(copy).equals(panel))

(root / "CCC.csv").write_text(header + "2024-01-02,5,4,6,5,10\n2024-01-03,5,6,4,5,10\n")
try:
    load_panel(root)
except DataError as exc:
    print("error:", exc)

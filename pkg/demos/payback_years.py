"""
How many years of earnings buy the share?
=========================================

A stock at ten times earnings pays itself back in ten years only if
earnings never change.  With growth the wait is shorter, with contraction
it is longer, and past a certain rate of decline it never ends.
"""

import numpy as np

from gape import (ValuationInputs, cumulative_earnings, ga_pe, payback_proportion,
                  peg_payback_period, solvency_bound)

# earnings growing 10% a year, summed year by year
for year in range(1, 10):
    print(year, round(cumulative_earnings(1.0, 0.10, year), 2))

# the whole-year answer and the real-valued one
stock = ValuationInputs(price=10.0, eps=1.0, growth=0.10)
print("whole years:", peg_payback_period(stock))
print("GA-P/E:     ", ga_pe(stock).n)

# sweep growth for a fixed P/E of 15
for g in np.linspace(-0.06, 0.30, 7):
    out = ga_pe(ValuationInputs(15.0, 1.0, float(g)))
    print(f"g={g:+.2f}  N={out.n:.3f}")

# below -E/(P+E) the total of all future earnings falls short of the price
bound = solvency_bound(15.0, 1.0)
shrinking = ValuationInputs(15.0, 1.0, bound - 0.01)
print("bound", bound, "finite?", ga_pe(shrinking).finite)
print("fraction of the price ever repaid:", payback_proportion(shrinking))

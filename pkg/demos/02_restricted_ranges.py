# coding: utf-8

# # Restricted-range implementations
#
# Some fast sin/cos routines skip range reduction. They are only valid on a
# small interval, so the tuner may pick one only if the argument provably
# stays inside that interval, rounding errors included.

# In[1]:

from optuner import builtin_catalog, load_benchmark, tune
from optuner.error_model import slack
from optuner.optimize import Interval

catalog = builtin_catalog()
reduced = catalog.lookup("sin", "vdt_reduced")
print(reduced.domain_lo, reduced.domain_hi, reduced.cost)


# The slack is the distance from the argument's true range to the domain edge.
# A negative slack rules the implementation out entirely.

# In[2]:

print(slack(Interval(-3.14159, 3.14159), -0.78, 0.78))
print(slack(Interval(-0.7, 0.7), -0.78, 0.78))


# Over the full circle the reduced routines never appear on the curve.

# In[3]:

wide = tune(load_benchmark("povprog"), catalog)
print(sum("vdt_reduced" in p.names().values() for p in wide.points), "points use it")


# Shrinking both angles to [-0.7, 0.7] makes them available, and they show up
# near the cheap end.

# In[4]:

narrow = tune(load_benchmark("povprog"), catalog, box={"theta": (-0.7, 0.7), "phi": (-0.7, 0.7)})
for p in narrow.points[:6]:
    print(f"cost={p.cost:6.2f} bound={p.verified_error:.3g}  {p.names()}")

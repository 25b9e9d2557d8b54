# coding: utf-8

# # Checking catalog claims
#
# Entries backed by a local routine can be sampled against a 128-bit
# reference. The samples give lower bounds on the true error, so a declared
# bound below the sampled one is definitely wrong.

# In[1]:

import math

from optuner import builtin_catalog
from optuner.catalog import dumps, loads, measure_accuracy, validate

catalog = builtin_catalog()
for spec in catalog:
    if spec.evaluable:
        print(f"{spec.name:22} declared delta={spec.delta:.3g}")


# In[2]:

for ev in ("identity:sin", "negidentity:cos", "table255:sin", "poly13:sin"):
    m = measure_accuracy(ev, (-math.pi, math.pi), samples=5000)
    print(f"{ev:16} sampled delta={m.delta:.4g}")


# The polynomial is only accurate near zero. That is why the catalog lists it
# twice: once narrow and tight, once over the full period and loose.

# In[3]:

print(measure_accuracy("poly13:sin", (-math.pi / 2, math.pi / 2), samples=5000).delta)
print(validate(catalog, samples=1000))


# User catalogs use the same plain text format, one record per line.

# In[4]:

mine = loads("optuner-catalog v1\n"
             "function=exp id=fastexp domain_lo=-700 domain_hi=700 eps=4.4e-16 delta=0 cost=3.5\n")
print(dumps(mine))

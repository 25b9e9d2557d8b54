# coding: utf-8

# # Tuning the photon incidence kernel
#
# The kernel below mixes two angles and a normal vector. It makes four calls
# to sin/cos, and each call can use a different library.

# In[1]:

from optuner import build_error_model, emit_c, linearize, load_benchmark, parse_expression, tune

source = load_benchmark("povprog")
print(source)


# Linearizing shares `cos(theta)` between its two uses, so there are four use sites.

# In[2]:

expr, inputs = parse_expression(source)
seq = linearize(expr, [i.name for i in inputs])
print(seq.describe())


# The error model gives one (A, B) pair per site. A multiplies the library's
# relative error and B its absolute error. The constant covers the fixed arithmetic.

# In[3]:

model = build_error_model(seq, inputs)
for label, a, b in zip(model.labels, model.A, model.B):
    print(f"{label:5} A={a:.4f} B={b:.4f}")
print("C =", model.constant)


# Tuning sweeps the cost/error trade-off and re-verifies every point.

# In[4]:

report = tune(source)
for p in report.points:
    print(f"{p.id:3} cost={p.cost:7.2f} bound={p.verified_error:.3g}  {p.names()}")


# Any point can be turned into C. Tables and polynomials are inlined, and other
# libraries become extern declarations.

# In[5]:

table_point = next(p for p in report.points if set(p.names().values()) == {"table255"})
print(emit_c(seq, table_point.selection, name="incidence"))

# %% [markdown]
# # Upper and lower bounds
# `upper_bound` solves one LP. The lower bound either commits to one block
# (`lower_bound_fixed`) or searches over mixtures of blocks
# (`lower_bound_motzkin`).

# %%
from sspbound import corpus, inf_bounds, lower_bound_fixed, lower_bound_motzkin, upper_bound, verify_certificate

for name in corpus.TABLE_MODELS:
    m = corpus.load(name)
    up, lo = upper_bound(m), lower_bound_fixed(m)
    print(f"{name:18s} upper {up.bound_expr:24s} lower {lo.bound_expr:24s}"
          f" at x0: [{float(lo.value_at_init):g}, {float(up.value_at_init):g}]")

# %% [markdown]
# Certificates are plain data and can be checked again on their own.

# %%
g = corpus.load("gambler")
cert = upper_bound(g)
print(cert.to_dict()["exact"], verify_certificate(g, cert).passed)

# %%
print(lower_bound_motzkin(g).bound_expr)
up, lo = inf_bounds(g.with_init([5]))
print("infimum in", [float(lo.value_at_init), float(up.value_at_init)])

# %% [markdown]
# The logarithmic model has no linear upper bound.

# %%
from sspbound import NoCertificate

try:
    upper_bound(corpus.load("log"))
except NoCertificate as e:
    print("no certificate:", e)

# %% [markdown]
# # Checking bounds against simulation and value iteration

# %%
from sspbound import Policy, corpus, simulate, upper_bound, value_iteration

g = corpus.load("gambler").with_init([5])
for policy in (Policy.always(1), Policy.always(2), Policy.uniform()):
    est = simulate(g, policy, 200_000, seed=42)
    print(f"{policy.describe():10s} {est.mean:.3f} +- {est.stderr:.3f}")

# %% [markdown]
# Results do not depend on the number of workers.

# %%
a = simulate(g, Policy.uniform(), 300_000, seed=1)
b = simulate(g, Policy.uniform(), 300_000, seed=1, workers=4)
print(a == b)

# %%
up = upper_bound(g)
r = value_iteration(g, [(0, 400)], sense="sup", boundary=up.bound_at)
print("V(5) =", r.value_at([5]), "after", r.sweeps, "sweeps; bound", float(up.value_at_init))
print("greedy choice at 5:", r.policy.table[5])

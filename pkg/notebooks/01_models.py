# %% [markdown]
# # Writing and loading models
# A model is one `while` loop. Blocks separated by `[]` are the
# nondeterministic choices, and `if prob(p)` branches are turned into
# sampling variables before the model is lowered to affine maps.

# %%
from sspbound import corpus, load_model
from sspbound.frontend.ast import pretty
from sspbound.frontend.desugar import desugar_prob_if
from sspbound.frontend.parser import parse_source

SRC = """
var x = 10;
while x >= 1 do
{ if prob(0.4) { x := x + 1; reward 1; } else { x := x - 1; } }
[] { if prob(0.3) { x := x + 1; reward 1; } else { x := x - 1; } }
od
"""

# %%
print(pretty(desugar_prob_if(parse_source(SRC))))

# %%
m = load_model(SRC)
print(m.summary(), m.program_vars, m.sampling_vars)

# %%
for name in corpus.ALL_MODELS:
    print(f"{name:18s} {corpus.load(name).summary()}")

# %% [markdown]
# Errors carry a location and every problem found is reported at once.

# %%
from sspbound import SMDPError

try:
    load_model("var x = 1;\nwhile x >= 1 do { x := x * x; } od")
except SMDPError as e:
    print(e)

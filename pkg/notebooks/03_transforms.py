# %% [markdown]
# # From conditions to LPs
# Every condition on the potential function is an inclusion of a polyhedron
# in a halfspace whose coefficients depend on the unknowns. Farkas' lemma
# turns one inclusion into linear constraints; Motzkin's theorem turns a
# covering by a union of halfspaces into a bilinear system.

# %%
from sspbound import corpus
from sspbound.certgen import build_template, encode_c2, encode_c3, encode_c4, farkas_transform, motzkin_transform

g = corpus.load("gambler")
t = build_template(g)
print(t.unknowns)
for asr in encode_c2(g, t) + [encode_c3(g, t, 0, ">=")] + encode_c4(g, t):
    print(asr.label())

# %%
sys_ = farkas_transform(encode_c3(g, t, 0, ">="))
print(len(sys_.multipliers), "multipliers,", len(sys_.constraints), "constraints")

# %%
c3 = [encode_c3(g, t, l, "<=") for l in range(g.k)]
bil = motzkin_transform(c3[0].lhs, g.program_vars, [(a.coeffs, a.bound) for a in c3])
print(len(bil.y), "guard multipliers,", len(bil.z), "block weights")

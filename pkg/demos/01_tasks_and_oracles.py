# %% [markdown]
# # Tasks, oracles and scoring
#
# The three task families, the exact answer each one expects, and how a model
# answer is parsed and scored.

# %%
import numpy as np

from layoutbench import (LUPair, generate_instance, life_step, lu_verify, parse_response,
                         score_lu, score_transpose, serialize_matrix, transpose)

# %% [markdown]
# ## Matrix transpose
# Exact match on every cell. A single wrong entry shows up in the error mask.

# %%
inst = generate_instance("transpose", 12, seed=2024)
print(serialize_matrix(inst.input[:3, :6]), "\n...")
assert (inst.target == transpose(inst.input)).all()

answer = "<think>swap rows and columns</think>\n" + serialize_matrix(inst.target)
print(score_transpose(parse_response("transpose", answer).value, inst.target).verdict)

wrong = inst.target.copy()
wrong[4, 9] += 1
rec = score_transpose(wrong, inst.target)
print(rec.verdict, "errors at", np.argwhere(rec.cell_errors).tolist())

# %% [markdown]
# ## Game of Life, one step, dead border

# %%
glider = np.array([[0, 1, 0, 0, 0],
                   [0, 0, 1, 0, 0],
                   [1, 1, 1, 0, 0],
                   [0, 0, 0, 0, 0],
                   [0, 0, 0, 0, 0]])
print(serialize_matrix(life_step(glider)))

# %% [markdown]
# ## LU decomposition, checked functionally
# Any triangular pair that reconstructs A within 1e-6 is accepted, unit
# diagonal or not.

# %%
lu = generate_instance("lu", 4, seed=7)
print("A =\n" + serialize_matrix(lu.input))
print(lu_verify(lu.input, lu.target))

d = np.diag(lu.target.l).astype(float)
doolittle = LUPair(lu.target.l / d, lu.target.u * d[:, None])
print("unit-diagonal form:", lu_verify(lu.input, doolittle))

reply = "<think>eliminate</think>\nL =\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\nU =\n" + serialize_matrix(lu.input)
print("identity L, U = A:", score_lu(parse_response("lu", reply).value, lu.input).verdict)

# %% [markdown]
# # Native 2D renderings and the plain-flow layout
#
# The same instance rendered three ways. The plain-flow image reuses the
# native matrix width, so only the row/column arrangement differs.

# %%
from pathlib import Path

from layoutbench import (FlowRenderSpec, MatrixRenderSpec, derive_flow_canvas_width,
                         generate_instance, render_flow, render_grid, render_matrix,
                         serialize_matrix)

out = Path(__file__).resolve().parent / "output"
out.mkdir(exist_ok=True)

# %%
inst = generate_instance("transpose", 12, seed=11)
spec = MatrixRenderSpec()
native = render_matrix(inst.input, spec)
native.save(out / "transpose_native.png")
print("native", native.width, "x", native.height)

# %%
width = derive_flow_canvas_width(inst.input, spec)
flow = render_flow(serialize_matrix(inst.input), width, FlowRenderSpec(word_gap_spaces=1))
flow.save(out / "transpose_flow.png")
print("flow  ", flow.width, "x", flow.height)

# %%
board = generate_instance("life", 8, seed=11)
render_grid(board.input).save(out / "life_grid.png")
render_matrix(generate_instance("lu", 5, seed=11).input,
              MatrixRenderSpec(cell_align="center")).save(out / "lu_native.png")
print("wrote", sorted(p.name for p in out.glob("*.png")))

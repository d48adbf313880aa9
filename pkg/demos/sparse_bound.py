"""The Hilbert form against its sparse dominators on a few random pairs."""
import numpy as np

from sparset1.engine import build_stopping_tree, sparse_bound_verify
from sparset1.experiments import random_test_function
from sparset1.grid import GridGeometry
from sparset1.operator import DiscreteOperator, hilbert
from sparset1.sparse import verify_sparsity

geo = GridGeometry(1, -9, 0)
T = DiscreteOperator.build(hilbert(), geo)
rng = np.random.default_rng(2024)

print(" trial     B_T(f,g)   Lambda_univ   Lambda_tree   ratio")
for trial in range(5):
    f = random_test_function(geo, rng)
    g = random_test_function(geo, rng)
    rep = sparse_bound_verify(T, f, g, seed=trial)
    print(f"{trial:6d} {rep.B_T:12.5f} {rep.lambda_universal:13.5f} {rep.lambda_stopping:13.5f}"
          f" {rep.ratio:7.3f}")

# the stopping tree is itself a sparse collection; look at it directly
tree = build_stopping_tree(T, f, g)
cert = verify_sparsity(tree.collection(), 0.5)
print(f"\nstopping tree: {len(tree)} nodes, testing level {tree.testing_level:.3f},"
      f" {tree.doublings} doublings")
print(f"sparsity with c=1/2: {cert.passes}, max overlap {cert.max_overlap:g}")
for node in tree.nodes[:6]:
    print(f"  cube scale {node.cube.scale:3d} index {node.cube.index}  depth {node.level}")

"""How doubling-like a point set is, measured two ways.

The doubling estimate counts how many half-radius balls centered on the data
are needed to cover any ball; the capacity estimate counts how many small
disjoint balls fit inside one. On small sets both are computed exactly, and
the script checks the two inequalities that tie them together.
"""

from lipext.metric import dyadic_k, estimate_capacity, estimate_doubling
from lipext.spaces import SpaceSpec, generate_space

print("set            points  lambda_hat  kappa(1/5)  kappa(1/2)")
for spec in (SpaceSpec("grid", 1, 8), SpaceSpec("grid", 2, 2), SpaceSpec("cantor", 1, 2),
             SpaceSpec("random-cloud", 3, 8, seed=1)):
    X = generate_space(spec)
    lam = estimate_doubling(X, exact=True).lambda_hat
    k5 = estimate_capacity(X, 0.2, exhaustive=True).kappa_hat
    k2 = estimate_capacity(X, 0.5, exhaustive=True).kappa_hat
    print(f"{spec.label:14s} {len(X):6d}  {lam:10d}  {k5:10d}  {k2:10d}")
    # lambda is bounded by the capacity at 1/5, and the capacity at eps by lambda^k
    assert lam <= k5
    assert k2 <= lam ** dyadic_k(0.5) and k5 <= lam ** dyadic_k(0.2)

print("\nBoth inequalities hold on every set above.")

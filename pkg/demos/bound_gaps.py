"""Bound gaps across a handful of random instances.

Prints the same table as ``bqr compare`` for a mix of two- and three-ball
instances.  Gaps are normalized by ``1 + |oracle|``; the Burer column should
never exceed the Kronecker or Zhen columns, and with two balls the exact
column is zero up to solver tolerance.
"""

from ballqcqp.harness import compare_instance, rows_to_csv
from ballqcqp.instance import generate

rows = [compare_instance(f"seed{s}-m{m}", generate(s, 2, m)) for s in range(1, 5) for m in (2, 3)]
print(rows_to_csv(rows))

for r in rows:
    worse = [k.value for k in r.gaps if r.gaps[k] < r.gaps["burer"] - 1e-5 and k.value != "moment2"
             and k.value != "exact-m2"]
    if worse:
        print(f"{r.instance_id}: Burer weaker than {worse}")
print("Burer dominates the Shor family on every row"
      if not any(r.gaps["burer"] > min(r.gaps["shor-kron"], r.gaps["shor-zhen"]) + 1e-5 for r in rows)
      else "unexpected ordering, see rows above")

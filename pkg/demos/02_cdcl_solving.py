"""The CDCL engine: solving, learned-clause statistics, and restarts.

Run:  python3 demos/02_cdcl_solving.py
"""

from gluesat import Budget, Solver, SolverConfig, random_ksat, schedule_threshold

# --- a single solve with full statistics --------------------------------------
f = random_ksat(n=60, m=256, k=3, seed=1)
result = Solver(f).solve()
st = result.stats
print(f"status {result.status} after {st.decisions} decisions, {st.conflicts} conflicts")
print(f"  propagations {st.propagations}, restarts {st.restarts}, runtime {st.runtime*1e3:.1f} ms")
print(f"  global learning rate (conflicts/decisions) {st.glr:.3f}")
print(f"  average glue level of learned clauses {st.avg_glue:.2f}")

# glue counts: how often each variable appeared in a glue (LBD <= 2) clause
top = sorted(enumerate(st.glue_counts, start=1), key=lambda kv: -kv[1])[:5]
print("  busiest glue variables:", [f"x{v}({c})" for v, c in top if c], "\n")

# --- watching the learned clauses as they appear -------------------------------
glues = []
Solver(random_ksat(40, 170, 3, 2)).solve(
    on_learn=lambda s, lits, bj, glue: glues.append((len(lits), glue))
)
print(f"learned {len(glues)} clauses; first five (length, glue): {glues[:5]}")
print("glue <= 2 clauses are kept forever during database reduction\n")

# --- budgets give UNKNOWN instead of hanging -----------------------------------
hard = random_ksat(150, 639, 3, 0)
capped = Solver(hard).solve(budget=Budget(max_conflicts=500))
print(f"budgeted solve: {capped.status} at {capped.stats.conflicts} conflicts")

# --- the refocus conflict schedule ---------------------------------------------
print("\nrefocus schedule (conflicts before the n-th refocus):")
for n in (1, 2, 5, 15, 16, 30):
    print(f"  n={n:2d}: {schedule_threshold(n):,}")

# restarts follow the fast/slow glue EMA comparison; both EMAs are
# bias-corrected, so a constant glue stream never triggers a restart
s = Solver(random_ksat(10, 30, 3, 0), config=SolverConfig())
for g in [2.0] * 50:
    s.update_glue_emas(g)
print(f"\nsteady glue stream: fast {s.glue_ema_fast():.3f} vs slow {s.glue_ema_slow():.3f}"
      f" -> restart? {s.should_restart()}")
for g in [9.0] * 40:
    s.update_glue_emas(g)
s.conflicts = 90
print(f"degrading stream:   fast {s.glue_ema_fast():.3f} vs slow {s.glue_ema_slow():.3f}"
      f" -> restart? {s.should_restart()}")

"""Wall-clock benchmark of the parallel-in-time adjoint solve.

Times one sequential backward solve, then the parareal version for growing
subinterval counts, and reports speedup S = T_s / T_p and parallel
efficiency E = S / N per row.  On a machine with one core per subinterval
the fine propagations overlap and the speedup approaches N/k for k parareal
iterations; on this single-worker run the wall-clock columns cannot beat
the sequential solve, so read the table for its structure instead: the fine
time per subinterval halves as N doubles, the serial coarse sweep stays a
tiny fraction of it, and the iteration count stays small.

The same table is available from the command line:

    pintsens bench builtin:half_wave_rectifier --tm 0.04 --N 2,4,8 \
        --dt 1e-4 --tend 0.04 --tol 1e-6 --out /tmp/bench
"""

from pathlib import Path

from pintsens import Qoi, builtin_circuit, efficiency, run_bench, speedup
from pintsens.cli import write_bench_table

nl = builtin_circuit("half_wave_rectifier", dt=2e-6, periods=2.0)
t_m = 0.9 * nl.directives.t_end
print(f"rectifier, {int(nl.directives.t_end / nl.directives.dt)} fine steps, "
      f"adjoint solve at t_m = {t_m * 1e3:.0f} ms")

records, reports = run_bench(nl, t_m, Qoi("out"), n_list=[2, 4, 8],
                             workers=1, repetitions=2, tol=1e-7)

print(f"\nsequential solution: {records[0].sequential_wall_s:.3f} s")
print(f"{'N':>4} {'fine (s)':>10} {'coarse (s)':>10} {'total (s)':>10} "
      f"{'speedup':>8} {'eff':>6} {'iters':>6}")
for r in records:
    print(f"{r.n_subintervals:>4} {r.fine_time_s:>10.3f} "
          f"{r.coarse_time_s:>10.3f} {r.total_wall_s:>10.3f} "
          f"{r.speedup:>8.2f} {r.efficiency:>6.2f} {r.iterations:>6}")

out = Path("/tmp/bench")
out.mkdir(parents=True, exist_ok=True)
write_bench_table(records, out)
print(f"\nmachine-readable table written to {out}/bench.json and bench.csv")

# what the same arithmetic yields once fine solves actually run concurrently:
# each iteration costs one fine subinterval plus the coarse sweep, so with
# k iterations the ideal parallel time is roughly k * T_s / N
n, k = 8, records[-1].iterations
t_seq = records[0].sequential_wall_s
t_ideal = k * t_seq / n + records[-1].coarse_time_s
s = speedup(t_seq, t_ideal)
print(f"projected with {n} true workers and {k} iterations: "
      f"speedup {s:.1f}, efficiency {efficiency(s, n):.2f}")

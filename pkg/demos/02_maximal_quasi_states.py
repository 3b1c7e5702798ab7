# How the maximal quasi-state is chosen from a window's power per basis index.
from quasistate import PowerSpectrum, enumerate_partitions, maximal_from_spectrum, greedy_partition

spec = PowerSpectrum.from_powers([0.4, 0.05, 0.4, 0.05])
for part in enumerate_partitions(4, spec, alpha_min=1.0):
    print("admissible", part.blocks, "dominants", part.dominants, "ratios", part.alphas)

q = maximal_from_spectrum(spec, alpha_min=1.0)
print("maximal: indices", q.indices, "dispersion", q.dispersion, "tied", q.tied)

# a balanced pair cannot be left out of the partition, so nothing survives
print("(0, .5, .5) ->", maximal_from_spectrum(PowerSpectrum.from_powers([0, .5, .5])))

# degenerate spectra are flagged rather than silently resolved
q = maximal_from_spectrum(PowerSpectrum.from_powers([0, .25, .25, .5]))
print("tie example: picked", q.partition.blocks, "tied =", q.tied)

# the greedy heuristic is there for large bases; it never finds more blocks
big = PowerSpectrum.from_powers([0.3, 0.01, 0.2, 0.02, 0.25, 0.03, 0.1, 0.04, 0.05])
print("greedy", greedy_partition(big, 1.0).blocks)
print("exact ", maximal_from_spectrum(big, 1.0).partition.blocks)

# Alice reports through a crowded channel; Bob keeps only what he can read.
from quasistate.channel import (alice_criterion, alice_machine, decode, delayed_divergence_pair,
                                histogram, identification_experiment, noise_machine, run_channel)

noise = [noise_machine(6, seed, mimic=(seed == 0)) for seed in range(3)]
stream = run_channel(alice_machine(3), noise, ticks=40, seed=5)
records = decode(stream, alice_criterion(n_pointers=3))
print(len(stream), "messages in the channel,", len(records), "records kept")
for r in records[:6]:
    print(f"  [{r.sender}, {r.content}, {r.time}]")
hist = histogram(records, 4)
print("pointer arrival times:", {k: v for k, v in hist.items() if k})

# without a criterion fixed in advance, finite observation is not enough
for depth in range(6):
    print("depth", depth, "distinguishing input:", identification_experiment(delayed_divergence_pair(4), depth))

# A full measurement: chain -> apparatus pointer -> channel -> observer state.
from dataclasses import replace

from quasistate.consistency import (check_diagram1, check_diagram2, end_to_end_measurement,
                                    single_entry_faults)

sc = end_to_end_measurement(n_windows=30, n_pointers=3, seed=1)
m = sc.measurement
print("apparatus pointers:", sc.apparatus_pointers)
print("observer labels:   ", m.observer.labels()[:8], "...")
print("single observer check:", check_diagram1(m.observer).to_json()["consistent"])
print("measurement check:    ", check_diagram2(m).to_json()["consistent"])

# corrupt one table entry at a time and see where the checks complain
for f in list(single_entry_faults(m.observer))[:4]:
    rep = check_diagram2(replace(m, observer=f.instance))
    print(f"{f.table}[{f.key}] -> {f.value}: {len(rep.violations)} violations, "
          f"windows {sorted(rep.windows_flagged())[:6]}")

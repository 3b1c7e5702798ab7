"""Amplifying projections of windowed amplitude trajectories, maximal
quasi-states, a measurement-as-communication simulator, Born-rule
Monte Carlo checks and commutation checks for observer interpretations."""

from .config import DEFAULT, Thresholds
from .trajectory import (Balanced, ConstantPure, Frozen, Piecewise, PowerMartingale, RandomFast,
                         ShortWindowWarning, Trajectory, TrajectoryError, Window, WindowError,
                         generate, load_trajectory, save_trajectory, sparse_readout, spin_array,
                         tensor, windows)
from .projection import (BruteForceLimitError, Partition, PowerSpectrum, QuasiState,
                         enumerate_partitions, greedy_partition, maximal_from_spectrum,
                         maximal_quasi_state, power_spectrum, q_general, q_single,
                         spin_array_quasi_state, write_quasi_states)
from .born import (BornResult, ChainError, CounterAssignment, JointChain, PreparedSystem,
                   build_chain, fine_grain, induced_quasi_state, monte_carlo, pointer_powers,
                   pointer_probability, rationalize, recorded_pointer, swap_segments, swap_test)
from .channel import (Criterion, MalformedMessageError, Message, MooreMachine, Record,
                      alice_criterion, alice_machine, decode, delayed_divergence_pair, histogram,
                      identification_experiment, noise_machine, run_channel)
from .consistency import (DiagramInstance, DiagramReport, Measurement, QuasiProcess,
                          UnresolvedIdentifierError, WindowMisalignmentError, check_diagram1,
                          check_diagram2, end_to_end_measurement, induce_process, quasi_state_id)

__version__ = "0.1.0"

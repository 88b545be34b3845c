"""Byzantine approximate agreement protocols with a deterministic
adversarial network simulator and complexity measurement."""

from .automaton import Automaton, Composite, Multicast, Output, Halt, ProtoContext
from .kernel import (Adversary, Envelope, SimConfig, SimResult, TraceMetrics,
                     count_bits, measure_rounds, run_simulation, trace_to_jsonl)
from .graded import Gc1, GradedConsensus, Prop, build_gc1, build_gc2k, build_prop, double_grade
from .trees import (Tree, build_spider_fixture, central_decomposition, convex_hull,
                    gc_input_index, grow_to_power_of_two, random_agreement_tree,
                    spider_decode, tree_center, tree_diameter)
from .tree_agree import TcInput, TreeAgreement, build_tc, path_input
from .path_agree import (AgrZ, ExponentialSearch, TwoStep, build_agr_z, build_exp,
                         build_two_step, decode_two_step, floor_log2_plus1)
from .terminate import (Gc2WithTerm, PiTerm, Term, TreeAgreementTerminating,
                        build_tc_star, build_term, compose_with_term)
from .real_agree import (EpsilonAgreement, build_epsilon_agreement,
                         round_ties_toward_zero, unround)

__version__ = "0.1.0"

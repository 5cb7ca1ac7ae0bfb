"""Flat outputs of two-input control-affine systems and their triangular normal form."""

from .candidates import (CandidateReport, LinearizationReport, SecondComponentResult, SequenceStep,
                         candidate_sequence, distribution_sequence, prolonged_system, second_component,
                         static_feedback_linearizable)
from .model import (DimensionMismatch, ExtendedChart, FlatCandidate, FlatnessError, NoInputInfluence,
                    NonAffineFeedback, NotAccessible, NotFlatWithinBound, PoleEncountered,
                    RankLadderViolation, SystemModel, extended_vector_field, fresh_name,
                    output_derivatives)
from .normalform import (NormalFormResult, affine_feedback, corrupt_row, invert_state_map,
                         simulate_check, triangular_transform)
from .theorem import (IndexData, LadderLevel, PQLadder, Theorem1Result, build_pq_ladder,
                      check_theorem1, intersect_with_states, relative_degree, relative_degrees,
                      verify_flat_output)

__all__ = [
    "CandidateReport", "LinearizationReport", "SecondComponentResult", "SequenceStep",
    "candidate_sequence", "distribution_sequence", "prolonged_system", "second_component",
    "static_feedback_linearizable", "DimensionMismatch", "ExtendedChart", "FlatCandidate",
    "FlatnessError", "NoInputInfluence", "NonAffineFeedback", "NotAccessible", "NotFlatWithinBound",
    "PoleEncountered", "RankLadderViolation", "SystemModel", "extended_vector_field", "fresh_name",
    "output_derivatives", "NormalFormResult", "affine_feedback", "corrupt_row", "invert_state_map",
    "simulate_check", "triangular_transform", "IndexData", "LadderLevel", "PQLadder",
    "Theorem1Result", "build_pq_ladder", "check_theorem1", "intersect_with_states",
    "relative_degree", "relative_degrees", "verify_flat_output",
]

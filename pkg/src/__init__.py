"""
Agentic Task Exposure (ATE) engine
"""

__version__ = '1.0.0'

from .adoption import AdoptionModel, RegionConfig, TierParams, VelocityMode, logistic_v, v_eff
from .capmodel import AbilityMap, TextModifierRule, base_cap, cap_for_task
from .covmodel import CovRubric, load_rubric, score_cov
from .ingest import TaskRecord, generate_fixture_corpus, parse_task_corpus
from .scoring import AteRecord, OccupationScore, ate, base_ate, classify_risk, compute_weights

__all__ = [
    'AbilityMap',
    'AdoptionModel',
    'AteRecord',
    'CovRubric',
    'OccupationScore',
    'RegionConfig',
    'TaskRecord',
    'TextModifierRule',
    'TierParams',
    'VelocityMode',
    'ate',
    'base_ate',
    'base_cap',
    'cap_for_task',
    'classify_risk',
    'compute_weights',
    'generate_fixture_corpus',
    'load_rubric',
    'logistic_v',
    'parse_task_corpus',
    'score_cov',
    'v_eff',
]

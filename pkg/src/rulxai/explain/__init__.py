"""Model-agnostic local explanations: LIME surrogates and Shapley values."""
from .explanation import Contribution, ExplainError, Explanation
from .lime import lime_explain
from .render import force_layout, render_explanation
from .shap import MAX_EXACT_FEATURES, exact_shapley, kernel_shap

__all__ = [
    "Contribution", "ExplainError", "Explanation", "MAX_EXACT_FEATURES", "exact_shapley",
    "force_layout", "kernel_shap", "lime_explain", "render_explanation",
]

"""askless: learn a segmentation model from full surveys, then ask fewer questions.

The pipeline: generate or ingest labeled survey responses, learn a discrete
Bayesian network (structure + CPTs), search for the smallest question count
k that keeps classification quality above a threshold, and serve live
sessions that update a respondent's segment after every answer.
"""

from .bn import (
    BayesianNetwork,
    Cpt,
    Dag,
    Evidence,
    joint_probability,
    load_network,
    markov_equivalent,
    network_from_doc,
    network_to_doc,
    parent_config_index,
    save_network,
    skeleton,
    topological_order,
    v_structures,
    validate_dag,
)
from .data import (
    Dataset,
    GeneratorConfig,
    default_generator_config,
    derive_dis,
    generate_synthetic,
    load_generator_config,
    read_csv,
    split_indices,
    write_csv,
)
from .inference import (
    EXACT,
    LIKELIHOOD_WEIGHTING,
    Posterior,
    eliminate,
    incremental_update,
    lw_query,
    predict,
    query,
)
from .learning import (
    AIC,
    BIC,
    HillClimbConfig,
    fit_mle,
    hill_climb,
    hill_climb_result,
    learn_network,
    log_likelihood,
    score,
)
from .metrics import EvaluationReport, evaluate, f_score
from .reduction import (
    FindKConfig,
    FindKReport,
    choose_k,
    find_k,
    random_subset,
)
from .schema import (
    QuestionSpec,
    SurveySchema,
    default_schema,
    load_schema,
    parse_schema,
)

__version__ = "0.1.0"

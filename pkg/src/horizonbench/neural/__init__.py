from .cells import (
    GruCellParams,
    LstmCellParams,
    gru_cell_forward,
    lstm_cell_forward,
)
from .mlp import MlpModel, fit_mlp, lm_step
from .networks import (
    PAPER_SETTINGS,
    Architecture,
    ConvSpec,
    SequenceModelSpec,
    Shuffle,
    build_network,
    paper_spec,
    reduced_spec,
)
from .training import FittedSequenceModel, encoder_forecast, initial_parameters, train_sequence_model


def cnn_forward(spec: ConvSpec, theta, window) -> float:
    """Scalar CNN output for one window of length ``spec.window``."""
    import numpy as np

    from .networks import ConvNetwork

    window = np.asarray(window, dtype=np.float64)
    return float(ConvNetwork(spec).predict(np.asarray(theta), window[None, :])[0])


def backprop_through_time(spec: SequenceModelSpec, theta, batch):
    """Exact MSE gradient over a SupervisedSet slice, flat in the network's layout."""
    return build_network(spec).loss_and_grad(theta, batch.inputs, batch.targets)[1]

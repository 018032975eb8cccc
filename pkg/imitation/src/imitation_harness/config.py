"""Training configuration for the behavior cloning harness.

Fields not pinned by the harness contract are deliberate defaults and are
echoed into every model file and report so results stay interpretable:
hidden_width 64, Adam in full batch, float64 on CPU, and a final linear
layer initialised near zero so the untrained policy starts close to u = 0.
"""

import hashlib
import json
from dataclasses import asdict, dataclass


_ACTIVATIONS = ("gelu", "tanh", "relu")


@dataclass(frozen=True)
class TrainConfig:
    """Everything train() needs besides the output directory.

    dataset_path points at a demonstration CSV exported by the controller
    CLI.  The policy network is a multilayer perceptron with hidden_layers
    hidden layers of hidden_width units each and the given activation
    between them.  The loss is

        MSE(policy(x), u) + jacobian_loss_weight * MSE(d policy/d x, J)

    optimised with full-batch Adam at rate lr for epochs steps, seeded so
    repeated runs give bit-identical weights on the same platform.
    """

    dataset_path: str
    hidden_layers: int = 4
    hidden_width: int = 64
    activation: str = "gelu"
    jacobian_loss_weight: float = 0.1
    epochs: int = 600
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {_ACTIVATIONS}, got {self.activation!r}"
            )
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be at least 1")
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not (self.lr > 0.0):
            raise ValueError("lr must be positive")
        if self.jacobian_loss_weight < 0.0:
            raise ValueError("jacobian_loss_weight must be non-negative")

    def recipe(self):
        """Fields that define the training recipe, for comparing runs.

        The dataset is identified by content hash elsewhere and the seed is
        the one knob meant to vary across repeats, so neither belongs here.
        """
        fields = asdict(self)
        fields.pop("dataset_path")
        fields.pop("seed")
        fields["optimizer"] = "adam(full-batch)"
        fields["schedule"] = "cosine-to-lr/100"
        fields["dtype"] = "float64"
        return fields

    def config_hash(self):
        """Hash of the recipe; datasets are hashed separately by content."""
        canonical = json.dumps(self.recipe(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()

"""Policy network: a small MLP with input standardisation and exact Jacobians.

The network maps a raw state x to an input u through fixed standardisation
buffers (x - mean) / std followed by hidden_layers hidden layers.  Its
Jacobian with respect to the raw state is obtained by autograd and the
chain rule, so the training loss can match expert Jacobians directly and
evaluation can report Jacobian errors in raw state units.
"""

import hashlib

import numpy as np
import torch
from torch import nn


_ACTIVATION_LAYERS = {"gelu": nn.GELU, "tanh": nn.Tanh, "relu": nn.ReLU}


class MlpPolicy(nn.Module):
    """Standardise, run the MLP, and expose raw-state Jacobians."""

    def __init__(self, d_x, d_u, hidden_layers, hidden_width, activation):
        super().__init__()
        self.d_x = int(d_x)
        self.d_u = int(d_u)
        self.arch = {
            "d_x": self.d_x,
            "d_u": self.d_u,
            "hidden_layers": int(hidden_layers),
            "hidden_width": int(hidden_width),
            "activation": activation,
        }
        act = _ACTIVATION_LAYERS[activation]
        layers = [nn.Linear(self.d_x, hidden_width), act()]
        for _ in range(hidden_layers - 1):
            layers += [nn.Linear(hidden_width, hidden_width), act()]
        layers.append(nn.Linear(hidden_width, self.d_u))
        self.net = nn.Sequential(*layers)
        self.register_buffer("x_mean", torch.zeros(self.d_x))
        self.register_buffer("x_std", torch.ones(self.d_x))
        # Start near the zero policy: small final weights keep the initial
        # outputs (and hence the initial loss) set by the data scale alone.
        final = self.net[-1]
        nn.init.normal_(final.weight, std=1e-2)
        nn.init.zeros_(final.bias)
        self.double()

    def set_standardisation(self, x_mean, x_std):
        mean = torch.as_tensor(np.asarray(x_mean, dtype=float))
        std = torch.as_tensor(np.asarray(x_std, dtype=float))
        std = torch.clamp(std, min=1e-8)
        self.x_mean.copy_(mean)
        self.x_std.copy_(std)

    def forward(self, x):
        return self.net((x - self.x_mean) / self.x_std)

    def value_and_jacobian(self, x, create_graph=False):
        """Return (u, J) with J[k] = d u_k / d x_k in raw state units.

        x has shape (n, d_x); u is (n, d_u) and J is (n, d_u, d_x).  Rows
        are independent, so summing each output coordinate over the batch
        before differentiating yields the per-row gradients in one pass.
        """
        x = x.requires_grad_(True)
        u = self.forward(x)
        rows = []
        for i in range(self.d_u):
            (g,) = torch.autograd.grad(
                u[:, i].sum(), x, create_graph=create_graph, retain_graph=True
            )
            rows.append(g)
        jac = torch.stack(rows, dim=1)
        return u, jac

    def policy_fn(self):
        """Plain numpy closure x -> u for closed-loop simulation."""

        def policy(x, t=0):
            del t
            with torch.no_grad():
                xt = torch.as_tensor(np.asarray(x, dtype=float)).reshape(1, -1)
                return self.forward(xt).numpy().reshape(-1)

        return policy


def weights_hash(model):
    """SHA-256 over all parameters and buffers in definition order."""
    digest = hashlib.sha256()
    for name, tensor in list(model.named_parameters()) + list(model.named_buffers()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def save_policy(path, model, extras):
    """Write the network plus bookkeeping (config echo, hashes, curves path)."""
    payload = {
        "arch": model.arch,
        "state_dict": model.state_dict(),
        "extras": extras,
    }
    torch.save(payload, path)


def load_policy(path):
    """Read a model file back into (MlpPolicy, extras dict)."""
    payload = torch.load(path, weights_only=False)
    arch = payload["arch"]
    model = MlpPolicy(
        arch["d_x"],
        arch["d_u"],
        arch["hidden_layers"],
        arch["hidden_width"],
        arch["activation"],
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["extras"]

"""Central finite-difference gradient checking against autograd, in float64."""

import numpy as np
import torch


def fd_grad(f, x: torch.Tensor, h: float = 1e-6, coords=None) -> torch.Tensor:
    """Central differences of scalar f wrt x, optionally only at flat `coords`."""
    flat = x.detach().clone().reshape(-1)
    n = flat.numel()
    coords = range(n) if coords is None else coords
    g = torch.zeros(n, dtype=torch.float64)
    for i in coords:
        orig = float(flat[i])
        flat[i] = orig + h
        fp = float(f(flat.reshape(x.shape)))
        flat[i] = orig - h
        fm = float(f(flat.reshape(x.shape)))
        flat[i] = orig
        g[i] = (fp - fm) / (2.0 * h)
    return g.reshape(x.shape)


def rel_error(analytic: torch.Tensor, fd: torch.Tensor) -> float:
    a = analytic.detach().reshape(-1).to(torch.float64)
    b = fd.detach().reshape(-1).to(torch.float64)
    denom = max(float(b.norm()), float(a.norm()), 1e-12)
    return float((a - b).norm()) / denom


def check_input_grad(fn, x: torch.Tensor, h: float = 1e-6, rtol: float = 1e-3) -> float:
    """Compare autograd d fn(x) / dx with central differences; returns rel error."""
    x = x.detach().clone().to(torch.float64).requires_grad_(True)
    (grad,) = torch.autograd.grad(fn(x), x)
    fd = fd_grad(lambda v: fn(v), x, h=h)
    err = rel_error(grad, fd)
    assert err <= rtol, f"input-gradient mismatch: rel err {err:.3e} > {rtol}"
    return err


def check_param_grads(
    loss_fn,
    module: torch.nn.Module,
    h: float = 1e-6,
    rtol: float = 1e-3,
    coords_per_tensor: int = 6,
    seed: int = 0,
) -> float:
    """Compare autograd parameter gradients of scalar loss_fn() against central
    differences on a random subset of coordinates per parameter tensor."""
    params = [p for p in module.parameters() if p.requires_grad]
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params)
    rng = np.random.default_rng(seed)

    analytic, fd = [], []
    for p, g in zip(params, grads):
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        n = flat.numel()
        idxs = rng.choice(n, size=min(coords_per_tensor, n), replace=False)
        for i in idxs:
            orig = float(flat[i])
            with torch.no_grad():
                flat[i] = orig + h
            fp = float(loss_fn())
            with torch.no_grad():
                flat[i] = orig - h
            fm = float(loss_fn())
            with torch.no_grad():
                flat[i] = orig
            fd.append((fp - fm) / (2.0 * h))
            analytic.append(float(gflat[i]))
    err = rel_error(torch.tensor(analytic), torch.tensor(fd))
    assert err <= rtol, f"parameter-gradient mismatch: rel err {err:.3e} > {rtol}"
    return err

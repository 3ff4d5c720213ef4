import pytest

from beammix.channel import ArrayGeometry
from beammix.config import default_config
from beammix.net import NetConfig


@pytest.fixture(scope="session")
def tiny_cfg():
    """Desk-scale-in-miniature config for fast experiment-layer tests."""
    return default_config(
        geometry=ArrayGeometry(n_antennas=8),
        net=NetConfig(n_antennas=8, hidden_widths=(24, 24, 16)),
        n_total=48,
        n_eval=16,
        train_epochs=25,
        train_batch_size=16,
        snr_grid_db=(10.0,),
        q_grid=(0.0, 0.5, 1.0),
        sweep_epochs=25,
        hessian_samples=6,
        scaling_n_values=(16, 24, 40),
    )

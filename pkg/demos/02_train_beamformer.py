"""Train the self-supervised beamformer on one scene family.

A compact version of the matched-training experiment: 16 antennas, a few
hundred epochs. The learned beamformer is compared per SNR point against
the MRT oracle (the exact single-user optimum) and an oversampled DFT
codebook search.

Run:  python demos/02_train_beamformer.py   (about a minute)
"""

import numpy as np

from beammix import (
    ArrayGeometry,
    NetConfig,
    TrainSchedule,
    batch_rates,
    codebook_search,
    default_scene_families,
    dft_codebook,
    encode_csi,
    estimate_channel,
    generate_dataset,
    init_params,
    mrt_rate,
    train,
)

N_T = 16
geometry = ArrayGeometry(n_antennas=N_T)
scene = default_scene_families()["family_A"]
net = NetConfig(n_antennas=N_T, hidden_widths=(96, 96, 2 * N_T), noise_var=0.1)

train_set = generate_dataset(scene, geometry, n=400, base_seed=0)
test_set = generate_dataset(scene, geometry, n=200, base_seed=10_000)

pairs = [
    (encode_csi(estimate_channel(s.h, 20.0, 100_000 + i)), s.h[None, :])
    for i, s in enumerate(train_set.samples)
]
params = init_params(net, rng_seed=1)
schedule = TrainSchedule(epochs=400, batch_size=32, learning_rate=1e-3, seed=2)
print(f"training: {train_set.n} samples, {schedule.epochs} epochs ...")
params, history = train(params, pairs, net, schedule)
print(f"train loss: {history[0]:.3f} -> {history[-1]:.3f}")

x_test = np.stack(
    [
        encode_csi(estimate_channel(s.h, 20.0, 200_000 + i))
        for i, s in enumerate(test_set.samples)
    ]
)
h_test = test_set.h_matrix()[:, None, :]
codebook = dft_codebook(N_T, oversampling=2)

print(f"\n{'SNR':>5} {'network':>9} {'codebook':>9} {'MRT':>9} {'net/MRT':>8}")
for snr_db in (0.0, 5.0, 10.0, 15.0, 20.0):
    sigma2 = 10.0 ** (-snr_db / 10.0)
    cfg = NetConfig(
        n_antennas=N_T, hidden_widths=(96, 96, 2 * N_T), noise_var=sigma2
    )
    net_rate = float(batch_rates(params, x_test, h_test, cfg).mean())
    cb_rate = float(
        np.mean([codebook_search(s.h, codebook, 1.0, sigma2)[1] for s in test_set.samples])
    )
    oracle = float(np.mean([mrt_rate(s.h, 1.0, sigma2) for s in test_set.samples]))
    print(
        f"{snr_db:>5.1f} {net_rate:>9.3f} {cb_rate:>9.3f} {oracle:>9.3f} "
        f"{net_rate / oracle:>8.3f}"
    )
print("\nbit/s/Hz; the network approaches the oracle on its own family.")

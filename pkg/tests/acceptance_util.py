"""Shared computation for the acceptance suite's synthetic benchmark criteria."""
import numpy as np

from watf import (
    RunConfig,
    SynthSpec,
    compactness_metrics,
    foreground_background_weight_means,
    generate_benchmark,
    run_episode,
    support_class_pools,
)

EFFICACY_SPEC = SynthSpec(
    n_way=5,
    k_shot=1,
    n_query=15,
    m_descriptors=36,
    c_dim=16,
    noise_fraction=0.4,
    foreground_spread=0.1,
    n_background_motifs=3,
    seed=7,
)
EFFICACY_EPISODES = 200


def run_efficacy_benchmark():
    """Both ablation arms plus weight-split and compactness diagnostics, per episode."""
    cfg_on = RunConfig(k_neighbors=3, filtering_enabled=True, n_episodes=EFFICACY_EPISODES)
    cfg_off = RunConfig(k_neighbors=3, filtering_enabled=False, n_episodes=EFFICACY_EPISODES)
    acc_on, acc_off, fg_means, bg_means, sil_before, sil_after = [], [], [], [], [], []
    for synth in generate_benchmark(EFFICACY_SPEC, EFFICACY_EPISODES):
        episode = synth.episode
        on = run_episode(episode, cfg_on)
        off = run_episode(episode, cfg_off)
        acc_on.append(on.accuracy)
        acc_off.append(off.accuracy)
        fg, bg = foreground_background_weight_means(synth, on.filtered.support_weights.w_bar)
        fg_means.append(fg)
        bg_means.append(bg)
        sil_before.append(compactness_metrics(support_class_pools(episode)).silhouette)
        sil_after.append(compactness_metrics(support_class_pools(episode, on.filtered.support_result)).silhouette)
    return {
        "mean_accuracy_with_filtering": float(np.mean(acc_on)),
        "mean_accuracy_without_filtering": float(np.mean(acc_off)),
        "mean_foreground_w_bar": float(np.mean(fg_means)),
        "mean_background_w_bar": float(np.mean(bg_means)),
        "silhouette_improved_fraction": float(np.mean(np.asarray(sil_after) >= np.asarray(sil_before))),
    }

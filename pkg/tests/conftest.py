import dataclasses

from rtbench import (
    SampleStore,
    SimulatedClock,
    SimulatedSut,
    SimulatedSutConfig,
    default_settings,
    profile_by_name,
)


def sim_env(
    profile_name="ssd_resnet50",
    distribution="fixed",
    params=(10_000_000,),
    store_size=4,
    sample_bytes=64,
    seed=0,
    sut_seed=0,
    echo=False,
    cache_speedup=1.0,
    cache_window=0,
    sut_cls=SimulatedSut,
    **settings_overrides,
):
    """One-stop simulated run environment: (profile, settings, clock, sut, store)."""
    profile = profile_by_name(profile_name)
    settings_overrides.setdefault("min_duration_ns", 0)
    settings = dataclasses.replace(
        default_settings(profile),
        store_size=store_size,
        sample_bytes=sample_bytes,
        seed=seed,
        **settings_overrides,
    )
    clock = SimulatedClock()
    store = SampleStore(store_size, sample_bytes, seed)
    config = SimulatedSutConfig(
        distribution=distribution,
        params=params,
        cache_speedup=cache_speedup,
        cache_window=cache_window,
        seed=sut_seed,
        echo_responses=echo,
    )
    sut = sut_cls(config, store, clock)
    return profile, settings, clock, sut, store

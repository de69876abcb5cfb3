from typing import Any, Mapping, Optional


def print_run_summary(config: Any, extra: Optional[Mapping[str, Any]] = None) -> None:
    """
    Print a summary of a resolved run configuration.

    The summary lists the run name and directory, the seed, and one line per
    configuration section with its fields. It assumes that `config` has:
      - 'run_name': The name of the run.
      - 'run_dir': The directory its artifacts are written to.
      - 'seed': The root seed.
      - 'model_dump()': A mapping of section name to field values.

    Parameters:
        config: A resolved run configuration.
        extra: Additional key/value lines (dataset sizes, checkpoint path, ...).

    Returns:
        None
    """
    print("\n=== Run Summary ===")
    print(f"Run Name      : {getattr(config, 'run_name', 'N/A')}")
    print(f"Run Directory : {getattr(config, 'run_dir', 'N/A')}")
    print(f"Seed          : {getattr(config, 'seed', 'N/A')}")
    for section, values in config.model_dump(mode="json").items():
        if not isinstance(values, Mapping):
            continue
        print(f"{section.capitalize()}:")
        for key, value in values.items():
            print(f"  - {key}: {value}")
    for key, value in (extra or {}).items():
        print(f"{key:<14}: {value}")

"""Small helpers shared by the demo scripts."""
import argparse
from pathlib import Path


def out_dir(description: str) -> Path:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", type=Path, default=Path(__file__).parent / "out")
    out = p.parse_args().out
    out.mkdir(parents=True, exist_ok=True)
    return out


def pyplot():
    """matplotlib.pyplot with a file backend, or None when matplotlib is absent."""
    try:
        import matplotlib
    except ImportError:
        print("(matplotlib not installed: figures skipped)")
        return None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt

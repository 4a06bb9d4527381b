"""Dump the built-in acceptance scenarios to scenarios/*.json."""
from pathlib import Path

from overlap_action.scenario import dumps
from overlap_action.suite import all_scenarios

OUT = Path(__file__).resolve().parent.parent / "scenarios"


def main():
    OUT.mkdir(exist_ok=True)
    for name, sf in all_scenarios().items():
        (OUT / name).write_text(dumps(sf), encoding="utf-8")
        print(OUT / name)


if __name__ == "__main__":
    main()

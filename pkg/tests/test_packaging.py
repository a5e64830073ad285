from pathlib import Path

import pytest
import yaml

tomllib = pytest.importorskip("tomllib")

ROOT = Path(__file__).resolve().parents[1]


def test_pre_commit_is_a_development_tool():
    project = tomllib.loads((ROOT / "pyproject.toml").read_text())["project"]
    assert not any(requirement.startswith("pre-commit") for requirement in project["dependencies"])
    assert "pre-commit" in project["optional-dependencies"]["dev"]
    hooks = yaml.safe_load((ROOT / ".pre-commit-config.yaml").read_text())
    assert {"black", "isort", "codespell"} <= {hook["id"] for repo in hooks["repos"] for hook in repo["hooks"]}

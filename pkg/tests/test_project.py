import pytest
import yaml

from rospect.issues import IssueLog, Severity
from rospect.project import (
    ProjectError,
    dump_project,
    parse_project_file,
    parse_project_mapping,
)

MINIMAL = """\
project: Tiny
packages: ["one"]
"""


def test_fictibot_project_file(fictibot_project):
    spec = parse_project_file(fictibot_project)
    assert spec.project_name == "Fictibot"
    assert len(spec.packages) == 4
    assert list(spec.configurations) == ["multiplex"]
    config = spec.configurations["multiplex"]
    assert config.launch_files == ["fictibot_controller/launch/multiplexer.launch"]
    hints = config.hints.for_node("/ficticontrol").all_hints()
    assert len(hints) == 1
    assert hints[0].kind == "publishers"
    assert hints[0].name == "/controller_cmd"
    assert hints[0].type_name == "std_msgs/Float64"


def test_minimal_project_no_configurations(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text(MINIMAL)
    spec = parse_project_file(path)
    assert spec.project_name == "Tiny"
    assert spec.configurations == {}


def test_launch_path_outside_whitelist(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text(
        "project: X\npackages: [a]\nconfigurations:\n  c:\n    launch: [other_pkg/x.launch]\n"
    )
    with pytest.raises(ProjectError, match="other_pkg/x.launch"):
        parse_project_file(path)


def test_missing_required_keys(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("packages: [a]\n")
    with pytest.raises(ProjectError, match="project"):
        parse_project_file(path)
    path.write_text("project: X\n")
    with pytest.raises(ProjectError, match="packages"):
        parse_project_file(path)


def test_malformed_yaml_reports_line(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("project: X\npackages: [a\n")
    with pytest.raises(ProjectError, match=r":\d+"):
        parse_project_file(path)


def test_anchors_rejected(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("project: &a X\npackages: [*a]\n")
    with pytest.raises(ProjectError, match="anchor"):
        parse_project_file(path)


def test_unknown_keys_warn_not_fail(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text(MINIMAL + "plugins: [foo]\n")
    issues = IssueLog()
    spec = parse_project_file(path, issues)
    assert spec.project_name == "Tiny"
    finalized = issues.finalize()
    assert any("plugins" in i.message for i in finalized)
    assert all(i.severity is Severity.WARNING for i in finalized)


def test_duplicate_packages_rejected():
    with pytest.raises(ProjectError, match="duplicate"):
        parse_project_mapping({"project": "X", "packages": ["a", "a"]}, "mem")


def test_package_with_path_separator_rejected():
    with pytest.raises(ProjectError, match="invalid package"):
        parse_project_mapping({"project": "X", "packages": ["a/b"]}, "mem")


def test_round_trip(fictibot_project):
    spec = parse_project_file(fictibot_project)
    again = parse_project_mapping(yaml.safe_load(dump_project(spec)), "mem")
    assert again == spec


def test_parse_is_deterministic(fictibot_project):
    assert parse_project_file(fictibot_project) == parse_project_file(fictibot_project)

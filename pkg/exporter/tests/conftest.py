import json

import pytest

from concept_lens_exporter import create_checkpoint


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "tiny"
    create_checkpoint(path, seed=0)
    return path


@pytest.fixture
def grid_file(tmp_path):
    def write(contents=("chicken",), styles=("Chinese cuisine", "Italian cuisine"),
              replicates=1, baseline=None, template="food in {style} made with {content}"):
        payload = {
            "template": template,
            "contents": list(contents),
            "styles": list(styles),
            "replicates": replicates,
            "baseline_content": baseline or contents[0],
        }
        path = tmp_path / "grid.json"
        path.write_text(json.dumps(payload))
        return path
    return write

from unittest.mock import MagicMock, patch

import pytest
import requests

from scripts.fetch_penn import fetch


class TestFetch:
    def test_writes_body(self, tmp_path):
        response = MagicMock(content=b"tg inuidur1\n0 3\n")
        with patch("scripts.fetch_penn.requests.get", return_value=response) as get:
            path = fetch("http://example.invalid/penn", tmp_path / "sub" / "penn.ascii")
        get.assert_called_once_with("http://example.invalid/penn", timeout=30)
        assert path.read_bytes() == b"tg inuidur1\n0 3\n"

    def test_http_error(self, tmp_path):
        response = MagicMock()
        response.raise_for_status.side_effect = requests.HTTPError("404")
        with (
            patch("scripts.fetch_penn.requests.get", return_value=response),
            pytest.raises(requests.HTTPError),
        ):
            fetch("http://example.invalid/penn", tmp_path / "penn.ascii")
        assert not (tmp_path / "penn.ascii").exists()

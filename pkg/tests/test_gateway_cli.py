"""HTTP endpoints, CORS, error mapping, and the operational CLI."""

from __future__ import annotations

import io
import json
import sys

import pytest
import requests

from idvault.cli import main
from idvault.config import ServiceConfig, load_config
from idvault.errors import ConfigError
from idvault.gateway import serve

from .helpers import make_png

LOGIN_LISTING = """\
mutation Login(
 $input: UsersPermissionsLoginInput!
 ) {
  login(
   input: $input
  ) {
    jwt
    user {
      username
      email
    }
  }
}
"""


@pytest.fixture
def service(data_dir, free_port):
    config = ServiceConfig(
        port=free_port,
        data_dir=data_dir,
        jwt_secret="gateway-secret",
        cors_allowed_origins=["http://app.example"],
    )
    handle = serve(config)
    base = f"http://127.0.0.1:{free_port}"
    yield base, handle
    handle.stop()


def gql(base, query, variables=None, token=None):
    headers = {}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    response = requests.post(base + "/graphql", json={"query": query, "variables": variables or {}}, headers=headers)
    return response


def register_and_login(base, username="alice"):
    gql(base, f'mutation {{ createUser(input: {{username: "{username}", email: "{username}@x.io", password: "pw123456"}}) {{ user {{ username }} }} }}')
    body = gql(base, f'mutation {{ login(input: {{identifier: "{username}", password: "pw123456"}}) {{ jwt }} }}').json()
    return body["data"]["login"]["jwt"]


def upload(base, token, data=None, filename="card.png", mime="image/png"):
    return requests.post(
        base + "/upload",
        files={"file": (filename, data or make_png(600, 400), mime)},
        headers={"Authorization": f"Bearer {token}"},
    )


class TestGraphqlEndpoint:
    def test_login_listing_end_to_end(self, service):
        base, _ = service
        gql(base, 'mutation { createUser(input: {username: "kevin", email: "k@x.io", password: "pw123456"}) { user { username } } }')
        response = gql(base, LOGIN_LISTING, {"input": {"identifier": "kevin", "password": "pw123456"}})
        assert response.status_code == 200
        body = response.json()
        assert body["data"]["login"]["jwt"]
        assert body["data"]["login"]["user"] == {"username": "kevin", "email": "k@x.io"}

    def test_sdl_export_matches_engine(self, service):
        base, handle = service
        response = requests.get(base + "/graphql?sdl")
        assert response.status_code == 200
        assert response.text == handle.stack.engine.schema.sdl_text

    def test_malformed_json_is_400(self, service):
        base, _ = service
        response = requests.post(base + "/graphql", data=b"{not json", headers={"Content-Type": "application/json"})
        assert response.status_code == 400

    def test_missing_query_member_is_400(self, service):
        base, _ = service
        response = requests.post(base + "/graphql", json={"variables": {}})
        assert response.status_code == 400

    def test_parse_errors_travel_as_graphql_errors(self, service):
        base, _ = service
        response = gql(base, "query {")
        assert response.status_code == 200
        body = response.json()
        assert body["errors"][0]["extensions"]["code"] == "GRAPHQL_PARSE_FAILED"
        assert body["errors"][0]["locations"]

    def test_resolver_errors_are_200_with_errors(self, service):
        base, _ = service
        response = gql(base, "query { me { username } }")
        assert response.status_code == 200
        assert response.json()["errors"][0]["extensions"]["code"] == "UNAUTHENTICATED"

    def test_expired_token_behaves_anonymous(self, service):
        base, handle = service
        from idvault.auth import issue_token

        stale = issue_token("ghost", 0, 1, "gateway-secret")  # expired long ago
        response = gql(base, "query { me { username } }", token=stale)
        assert response.json()["errors"][0]["extensions"]["code"] == "UNAUTHENTICATED"

    def test_oversized_graphql_body_is_413(self, service):
        base, _ = service
        huge = "x" * (1024 * 1024 + 100)
        response = requests.post(base + "/graphql", json={"query": "{ me { id } }", "variables": {"pad": huge}})
        assert response.status_code == 413

    def test_protected_query_with_fresh_token(self, service):
        base, _ = service
        token = register_and_login(base)
        body = gql(base, "query { me { username email } }", token=token).json()
        assert body["data"]["me"]["username"] == "alice"


class TestUploadEndpoint:
    def test_upload_without_token_is_401(self, service):
        base, _ = service
        response = requests.post(base + "/upload", files={"file": ("c.png", make_png(2, 2), "image/png")})
        assert response.status_code == 401

    def test_upload_round_trip(self, service):
        base, _ = service
        token = register_and_login(base)
        response = upload(base, token)
        assert response.status_code == 200
        asset = response.json()
        assert asset["width"] == 600 and asset["height"] == 400
        assert asset["mimeType"] == "image/png"
        fetched = requests.get(base + asset["url"], headers={"Authorization": f"Bearer {token}"})
        assert fetched.status_code == 200
        assert fetched.content == make_png(600, 400)

    def test_media_requires_auth(self, service):
        base, _ = service
        token = register_and_login(base)
        asset = upload(base, token).json()
        assert requests.get(base + asset["url"]).status_code == 401

    def test_oversized_upload_is_413(self, service, data_dir, free_port):
        base, _ = service
        token = register_and_login(base)
        too_big = make_png(1, 1) + b"\x00" * (11 * 1024 * 1024)
        response = upload(base, token, data=too_big)
        assert response.status_code == 413

    def test_wrong_mime_is_415(self, service):
        base, _ = service
        token = register_and_login(base)
        response = upload(base, token, data=b"GIF89a...", filename="x.gif", mime="image/gif")
        assert response.status_code == 415

    def test_corrupt_image_is_400(self, service):
        base, _ = service
        token = register_and_login(base)
        response = upload(base, token, data=b"these are not pixels")
        assert response.status_code == 400


class TestRouting:
    def test_health_endpoint(self, service):
        base, _ = service
        body = requests.get(base + "/healthz").json()
        assert body["status"] == "ok" and body["service"] == "idvault"

    @pytest.mark.parametrize(
        "path", ["/idcards", "/idcard/123", "/api/idcards", "/users", "/rest/idcard", "/content-types"]
    )
    def test_no_per_type_rest_routes_exist(self, service, path):
        base, _ = service
        assert requests.get(base + path).status_code == 404
        assert requests.post(base + path, json={}).status_code == 404

    def test_handler_exposes_no_other_write_verbs(self):
        from idvault.gateway import _Handler

        assert not hasattr(_Handler, "do_PUT")
        assert not hasattr(_Handler, "do_DELETE")
        assert not hasattr(_Handler, "do_PATCH")

    def test_query_and_mutation_traffic_has_one_path(self, service):
        # the same document works only via /graphql
        base, _ = service
        ok = gql(base, "query { me { id } }")
        assert ok.status_code == 200
        elsewhere = requests.post(base + "/query", json={"query": "query { me { id } }"})
        assert elsewhere.status_code == 404


class TestCors:
    def test_configured_origin_gets_allow_header(self, service):
        base, _ = service
        response = gql(base, "query { me { id } }")
        assert "Access-Control-Allow-Origin" not in response.headers
        response = requests.post(
            base + "/graphql",
            json={"query": "query { me { id } }"},
            headers={"Origin": "http://app.example"},
        )
        assert response.headers["Access-Control-Allow-Origin"] == "http://app.example"

    def test_unlisted_origin_gets_no_header(self, service):
        base, _ = service
        response = requests.post(
            base + "/graphql",
            json={"query": "query { me { id } }"},
            headers={"Origin": "http://evil.example"},
        )
        assert "Access-Control-Allow-Origin" not in response.headers

    def test_preflight(self, service):
        base, _ = service
        response = requests.options(base + "/graphql", headers={"Origin": "http://app.example"})
        assert response.status_code == 204
        assert "POST" in response.headers["Access-Control-Allow-Methods"]
        assert "Authorization" in response.headers["Access-Control-Allow-Headers"]


class TestConfig:
    def test_defaults(self):
        config = load_config(env={})
        assert config.port == 1337
        assert config.max_upload_bytes == 10 * 1024 * 1024

    def test_file_env_flag_precedence(self, tmp_path):
        config_file = tmp_path / "config.json"
        config_file.write_text(json.dumps({"port": 2000, "jwt_secret": "from-file", "data_dir": "file-dir"}))
        config = load_config(
            config_path=str(config_file),
            env={"IDVAULT_PORT": "3000", "IDVAULT_JWT_SECRET": "from-env"},
            overrides={"port": 4000},
        )
        assert config.port == 4000  # flag beats env beats file
        assert config.jwt_secret == "from-env"
        assert config.data_dir == "file-dir"

    def test_unknown_key_rejected(self, tmp_path):
        config_file = tmp_path / "config.json"
        config_file.write_text(json.dumps({"mystery": 1}))
        with pytest.raises(ConfigError):
            load_config(config_path=str(config_file))

    def test_port_zero_fails_serve_check(self):
        config = ServiceConfig(port=0, jwt_secret="x")
        with pytest.raises(ConfigError):
            config.check_for_serve()

    def test_missing_secret_names_the_key(self):
        config = ServiceConfig()
        with pytest.raises(ConfigError) as err:
            config.check_for_serve()
        assert "jwt_secret" in str(err.value)

    def test_cors_origins_from_env_are_comma_split(self):
        config = load_config(env={"IDVAULT_CORS_ALLOWED_ORIGINS": "http://a.example, http://b.example"})
        assert config.cors_allowed_origins == ["http://a.example", "http://b.example"]


class TestCli:
    def test_schema_print_contains_login_mutation(self, capsys, data_dir):
        code = main(["schema", "print", "--data-dir", data_dir])
        assert code == 0
        out = capsys.readouterr().out
        assert "login(input: UsersPermissionsLoginInput!)" in out
        assert "type UsersPermissionsMe" in out

    def test_serve_port_zero_exits_one(self, capsys, data_dir, monkeypatch):
        monkeypatch.setenv("IDVAULT_JWT_SECRET", "x")
        code = main(["serve", "--port", "0", "--data-dir", data_dir])
        assert code == 1
        assert "port" in capsys.readouterr().err

    def test_serve_without_secret_exits_one_naming_key(self, capsys, data_dir, monkeypatch):
        monkeypatch.delenv("IDVAULT_JWT_SECRET", raising=False)
        code = main(["serve", "--data-dir", data_dir])
        assert code == 1
        assert "jwt_secret" in capsys.readouterr().err

    def test_unknown_flag_exits_two_with_usage(self, capsys, data_dir):
        with pytest.raises(SystemExit) as exit_info:
            main(["serve", "--bogus-flag"])
        assert exit_info.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_admin_create_user_reads_password_from_stdin(self, capsys, data_dir, monkeypatch):
        monkeypatch.setattr(sys, "stdin", io.StringIO("pw123456\n"))
        code = main(["admin", "create-user", "cliuser", "cli@x.io", "--data-dir", data_dir])
        assert code == 0
        assert "created user cliuser" in capsys.readouterr().out

    def test_admin_create_user_duplicate_exits_one(self, capsys, data_dir, monkeypatch):
        monkeypatch.setattr(sys, "stdin", io.StringIO("pw123456\n"))
        assert main(["admin", "create-user", "dup", "dup@x.io", "--data-dir", data_dir]) == 0
        monkeypatch.setattr(sys, "stdin", io.StringIO("pw123456\n"))
        assert main(["admin", "create-user", "dup", "dup2@x.io", "--data-dir", data_dir]) == 1
        assert "taken" in capsys.readouterr().err

    def test_verify_run_advances_a_record(self, capsys, data_dir, monkeypatch):
        from idvault.api_engine import ExecutionContext
        from idvault.auth import Principal, Role
        from idvault.gateway import ServiceStack

        stack = ServiceStack(ServiceConfig(data_dir=data_dir, jwt_secret="x"))
        user = stack.auth.register("up", "up@x.io", "pw123456")
        asset = stack.media_store.store_media(make_png(100, 100), "c.png", "image/png")
        ctx = ExecutionContext(principal=Principal(user_id=user.id, role=Role.AUTHENTICATED))
        record = stack.workflow.create_card(
            ctx,
            {
                "kind": "PASSPORT",
                "identifier": "X1234567",
                "name": "CLI",
                "cardImage": asset.id,
                "expiryDate": "2031-01-01",
                "faceTop": 0,
                "faceLeft": 0,
                "faceWidth": 10,
                "faceHeight": 10,
            },
        )
        stack.close()
        code = main(["verify", "run", record.id, "--data-dir", data_dir])
        assert code == 0
        assert "VERIFIED" in capsys.readouterr().out

    def test_verify_run_unknown_record_exits_one(self, capsys, data_dir):
        code = main(["verify", "run", "00000000000000000000000000", "--data-dir", data_dir])
        assert code == 1
        assert "no idcard record" in capsys.readouterr().err


class TestGracefulShutdown:
    def test_stop_closes_cleanly_and_frees_port(self, data_dir, free_port):
        config = ServiceConfig(port=free_port, data_dir=data_dir, jwt_secret="x")
        handle = serve(config)
        assert requests.get(f"http://127.0.0.1:{free_port}/healthz").status_code == 200
        handle.stop()
        second = serve(config)  # rebinding proves the socket was released
        assert requests.get(f"http://127.0.0.1:{free_port}/healthz").status_code == 200
        second.stop()

    def test_bound_port_is_config_error(self, data_dir, free_port, tmp_path):
        first = serve(ServiceConfig(port=free_port, data_dir=data_dir, jwt_secret="x"))
        with pytest.raises(ConfigError):
            serve(ServiceConfig(port=free_port, data_dir=str(tmp_path / "other"), jwt_secret="x"))
        first.stop()

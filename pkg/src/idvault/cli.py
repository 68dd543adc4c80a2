"""Operational command line: serve, schema print, admin create-user, verify run.

Configuration precedence everywhere: flags > IDVAULT_* environment > config
file > defaults. Config problems exit 1 with a message; argparse handles
unknown flags with usage text and exit 2.
"""

from __future__ import annotations

import argparse
import getpass
import sys
from datetime import datetime, timezone

from .api_engine import generate_schema
from .auth import AuthError, AuthService
from .config import ServiceConfig, load_config
from .errors import ConfigError, IdVaultError
from .gateway import ServiceStack, serve
from .persistence import JournalStore
from .schema_registry import SchemaRegistry


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--data-dir", dest="data_dir", help="data directory (default: ./data)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idvault", description="identity-document repository service")
    sub = parser.add_subparsers(dest="command", required=True)

    serve_parser = sub.add_parser("serve", help="run the HTTP service")
    _add_config_flags(serve_parser)
    serve_parser.add_argument("--port", type=int, help="listen port (default 1337)")
    serve_parser.add_argument("--jwt-secret", dest="jwt_secret", help="token signing secret")
    serve_parser.add_argument(
        "--auto-verify",
        dest="auto_verify_seconds",
        type=int,
        help="advance pending cards with the configured verifier every N seconds",
    )

    schema_parser = sub.add_parser("schema", help="schema tools")
    schema_sub = schema_parser.add_subparsers(dest="schema_command", required=True)
    schema_print = schema_sub.add_parser("print", help="emit the generated SDL and exit")
    _add_config_flags(schema_print)

    admin_parser = sub.add_parser("admin", help="administrative tools")
    admin_sub = admin_parser.add_subparsers(dest="admin_command", required=True)
    create_user = admin_sub.add_parser("create-user", help="register an account (prompts for password)")
    _add_config_flags(create_user)
    create_user.add_argument("username")
    create_user.add_argument("email")

    verify_parser = sub.add_parser("verify", help="verification tools")
    verify_sub = verify_parser.add_subparsers(dest="verify_command", required=True)
    verify_run = verify_sub.add_parser("run", help="run the configured verification client once")
    _add_config_flags(verify_run)
    verify_run.add_argument("record_id")

    return parser


def _config_from_args(args: argparse.Namespace) -> ServiceConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in ("port", "data_dir", "jwt_secret", "auto_verify_seconds")
    }
    return load_config(config_path=getattr(args, "config", None), overrides=overrides)


def _read_password(prompt: str) -> str:
    if sys.stdin.isatty():
        return getpass.getpass(prompt)
    line = sys.stdin.readline()
    if not line:
        raise ConfigError("no password provided on stdin")
    return line.rstrip("\n")


def _cmd_serve(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    config.check_for_serve()
    handle = serve(config)
    print(f"idvault listening on 127.0.0.1:{handle.port} (data dir: {config.data_dir})")
    try:
        handle.thread.join()
    except KeyboardInterrupt:
        print("shutting down")
        handle.stop()
    return 0


def _cmd_schema_print(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    registry = SchemaRegistry(config.data_dir)
    schema = generate_schema(tuple(registry.list_content_types()))
    print(schema.sdl_text)
    return 0


def _cmd_create_user(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    password = _read_password(f"password for {args.username}: ")
    store = JournalStore(config.data_dir)
    try:
        auth = AuthService(store, secret=config.jwt_secret or "cli-local", ttl_seconds=config.token_ttl_seconds)
        user = auth.register(args.username, args.email, password)
    finally:
        store.close()
    print(f"created user {user.username} <{user.email}> id={user.id}")
    return 0


def _cmd_verify_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    stack = ServiceStack(config)
    try:
        assert stack.workflow is not None
        client = stack.verification_client()
        record = stack.workflow.advance_with_client(
            args.record_id, client, datetime.now(timezone.utc)
        )
    finally:
        stack.close()
    print(f"record {record.id}: {record.values.get('statusCode')}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "schema":
            return _cmd_schema_print(args)
        if args.command == "admin":
            return _cmd_create_user(args)
        if args.command == "verify":
            return _cmd_verify_run(args)
    except (ConfigError, AuthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IdVaultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser.error("unknown command")
    return 2


if __name__ == "__main__":
    sys.exit(main())

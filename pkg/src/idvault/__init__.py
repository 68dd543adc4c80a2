"""idvault: a self-contained identity-document repository service.

Content-type definitions drive a generated GraphQL API served on a single
endpoint, with JWT authentication, journal-file persistence, content-addressed
media storage, and an ID-card verification workflow.
"""

__version__ = "0.1.0"

from .api_engine import ApiEngine, ExecutionContext, ExecutionResult, generate_schema
from .auth import AuthService, PermissionTable, Role
from .config import ServiceConfig, load_config
from .idcard import IdCardWorkflow, MockVerificationClient, idcard_definition, install_idcard
from .media import MediaAsset, MediaStore
from .persistence import Document, JournalStore, MemoryStore, StoreBackend
from .query_language import QueryDocument, parse, print_document, tokenize
from .schema_registry import (
    ContentTypeDefinition,
    FieldDefinition,
    FieldKind,
    SchemaRegistry,
    validate_document,
)

__all__ = [
    "ApiEngine",
    "AuthService",
    "ContentTypeDefinition",
    "Document",
    "ExecutionContext",
    "ExecutionResult",
    "FieldDefinition",
    "FieldKind",
    "IdCardWorkflow",
    "JournalStore",
    "MediaAsset",
    "MediaStore",
    "MemoryStore",
    "MockVerificationClient",
    "PermissionTable",
    "QueryDocument",
    "Role",
    "SchemaRegistry",
    "ServiceConfig",
    "StoreBackend",
    "generate_schema",
    "idcard_definition",
    "install_idcard",
    "load_config",
    "parse",
    "print_document",
    "tokenize",
    "validate_document",
    "__version__",
]

// The complete document corpus the client ever sends, plus thin wrappers.
// Keeping every query text here in one block makes the server-side parse
// compatibility easy to exercise end to end.

import { gql } from "./gql.js";
import type { Session } from "./session.js";

export const CREATE_USER_MUTATION = `mutation createUser($input: createUserInput) {
  createUser(input: $input) {
    user {
      username
      email
    }
  }
}`;

export const LOGIN_MUTATION = `mutation Login($input: UsersPermissionsLoginInput!) {
  login(input: $input) {
    jwt
    user {
      username
      email
    }
  }
}`;

export const ME_QUERY = `query Me { me { username email } }`;

export const MY_CARDS_QUERY = `query Cards($limit: Int, $start: Int) {
  idcards(limit: $limit, start: $start) {
    id
    kind
    identifier
    name
    statusCode
    uploadedAt
    verifiedAt
  }
}`;

export const CREATE_CARD_MUTATION = `mutation CreateCard($input: createIdcardInput!) {
  createIdcard(input: $input) {
    idcard {
      id
      statusCode
      uploadedAt
    }
  }
}`;

export const CARD_STATUS_QUERY = `query CardStatus($id: ID!) {
  idcard(id: $id) {
    id
    statusCode
  }
}`;

export const QUERY_CORPUS = [
  CREATE_USER_MUTATION,
  LOGIN_MUTATION,
  ME_QUERY,
  MY_CARDS_QUERY,
  CREATE_CARD_MUTATION,
  CARD_STATUS_QUERY,
];

export interface UserView {
  username: string;
  email: string;
}

export interface CardRow {
  id: string;
  kind: string | null;
  identifier: string | null;
  name: string | null;
  statusCode: string;
  uploadedAt: string | null;
  verifiedAt: string | null;
}

export const TERMINAL_STATUSES = new Set(["VERIFIED", "REJECTED"]);

export async function registerUser(username: string, email: string, password: string): Promise<UserView> {
  const data = await gql<{ createUser: { user: UserView } }>(CREATE_USER_MUTATION, {
    input: { username, email, password },
  });
  return data.createUser.user;
}

export async function login(identifier: string, password: string): Promise<Session> {
  const data = await gql<{ login: { jwt: string; user: UserView } }>(LOGIN_MUTATION, {
    input: { identifier, password },
  });
  return {
    jwt: data.login.jwt,
    username: data.login.user.username,
    email: data.login.user.email,
    obtainedAt: new Date().toISOString(),
  };
}

export async function fetchCards(session: Session, limit = 10, start = 0): Promise<CardRow[]> {
  const data = await gql<{ idcards: CardRow[] }>(MY_CARDS_QUERY, { limit, start }, session);
  return data.idcards;
}

export interface DeclaredFields {
  kind: string;
  identifier: string;
  name: string;
  expiryDate?: string;
  faceTop?: number;
  faceLeft?: number;
  faceWidth?: number;
  faceHeight?: number;
  [extra: string]: unknown;
}

export async function createCard(
  session: Session,
  mediaId: string,
  declared: DeclaredFields,
): Promise<{ id: string; statusCode: string }> {
  const data = await gql<{ createIdcard: { idcard: { id: string; statusCode: string } } }>(
    CREATE_CARD_MUTATION,
    { input: { ...declared, cardImage: mediaId } },
    session,
  );
  return data.createIdcard.idcard;
}

export async function cardStatus(session: Session, id: string): Promise<string> {
  const data = await gql<{ idcard: { statusCode: string } }>(CARD_STATUS_QUERY, { id }, session);
  return data.idcard.statusCode;
}

export interface UploadedAsset {
  id: string;
  url: string;
  width: number;
  height: number;
  sizeBytes: number;
}

export class UploadError extends Error {
  readonly kind: "too-large" | "unauthorized" | "bad-file" | "network";
  constructor(kind: UploadError["kind"], message: string) {
    super(message);
    this.kind = kind;
  }
}

export interface UploadOptions {
  endpoint?: string;
  fetchFn?: typeof fetch;
  onProgress?: (fraction: number) => void;
}

/** POST the image as multipart form data; XHR progress is wired by the
 * Upload screen in the browser, this path reports coarse 0 -> 1. */
export async function uploadFile(
  session: Session,
  file: Blob,
  filename: string,
  options: UploadOptions = {},
): Promise<UploadedAsset> {
  const endpoint = options.endpoint ?? "/upload";
  const fetchFn = options.fetchFn ?? ((...args: Parameters<typeof fetch>) => fetch(...args));
  options.onProgress?.(0);
  const form = new FormData();
  form.append("file", file, filename);
  let response: Response;
  try {
    response = await fetchFn(endpoint, {
      method: "POST",
      headers: { Authorization: `Bearer ${session.jwt}` },
      body: form,
    });
  } catch (cause) {
    throw new UploadError("network", `upload failed: ${String(cause)}`);
  }
  if (response.status === 413) throw new UploadError("too-large", "file too large");
  if (response.status === 401 || response.status === 403)
    throw new UploadError("unauthorized", "session expired");
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      detail = ((await response.json()) as { error?: string }).error ?? detail;
    } catch {
      // body was not JSON; keep the status text
    }
    throw new UploadError("bad-file", detail);
  }
  options.onProgress?.(1);
  return (await response.json()) as UploadedAsset;
}

export interface PollHandle {
  done: Promise<string>;
  cancel: () => void;
}

/** Re-read a card's status every intervalMs until it reaches a terminal
 * state; cancel() stops the timer (route changes must not leak polls). */
export function pollCardStatus(
  session: Session,
  cardId: string,
  intervalMs = 5000,
  onUpdate?: (status: string) => void,
): PollHandle {
  let cancelled = false;
  let timer: ReturnType<typeof setTimeout> | undefined;
  const done = new Promise<string>((resolve, reject) => {
    const tick = async () => {
      if (cancelled) return;
      let status: string;
      try {
        status = await cardStatus(session, cardId);
      } catch (error) {
        reject(error);
        return;
      }
      onUpdate?.(status);
      if (TERMINAL_STATUSES.has(status)) {
        resolve(status);
        return;
      }
      if (!cancelled) timer = setTimeout(tick, intervalMs);
    };
    void tick();
  });
  return {
    done,
    cancel: () => {
      cancelled = true;
      if (timer !== undefined) clearTimeout(timer);
    },
  };
}

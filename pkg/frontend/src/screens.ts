// The four screens. Rendering is plain DOM with a small component
// vocabulary (form, input, button, space, layout, table, breadcrumb) so the
// markup stays auditable; no framework involved.

import {
  CardRow,
  DeclaredFields,
  TERMINAL_STATUSES,
  UploadError,
  createCard,
  fetchCards,
  login,
  pollCardStatus,
  registerUser,
  uploadFile,
} from "./api.js";
import { GqlError } from "./gql.js";
import type { Router } from "./router.js";
import { Session, clearSession, loadSession, saveSession } from "./session.js";

const PAGE_SIZE = 10;
const POLL_INTERVAL_MS = 5000;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) node.append(child);
  return node;
}

function input(name: string, type: string, placeholder: string, required = true): HTMLInputElement {
  const node = el("input", { class: "input", name, type, placeholder });
  node.required = required;
  return node;
}

function space(): HTMLElement {
  return el("div", { class: "space" });
}

function errorLine(): HTMLElement {
  return el("p", { class: "form-error", role: "alert" });
}

function describe(error: unknown): string {
  if (error instanceof GqlError) {
    if (error.category === "network") return "server unreachable — check your connection and retry";
    return error.message;
  }
  if (error instanceof Error) return error.message;
  return String(error);
}

// -- Login ---------------------------------------------------------------------

export function renderLogin(root: HTMLElement, router: Router): void {
  const identifier = input("identifier", "text", "username or email");
  const password = input("password", "password", "password");
  const submit = el("button", { class: "button", type: "submit" }, ["Log in"]);
  const problem = errorLine();
  const form = el("form", { class: "form card" }, [
    el("h2", {}, ["Log in"]),
    identifier,
    space(),
    password,
    space(),
    submit,
    problem,
  ]);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    submit.disabled = true;
    problem.textContent = "";
    try {
      const session = await login(identifier.value, password.value);
      saveSession(session);
      router.go("dashboard");
    } catch (error) {
      problem.textContent = describe(error);
    } finally {
      submit.disabled = false;
    }
  });
  const toRegister = el("a", { href: "#/register", class: "switch-link" }, ["Need an account? Register"]);
  root.replaceChildren(form, toRegister);
}

// -- Register ------------------------------------------------------------------

export function renderRegister(root: HTMLElement, router: Router): void {
  const username = input("username", "text", "username");
  const email = input("email", "email", "email");
  const password = input("password", "password", "password (8+ characters)");
  const submit = el("button", { class: "button", type: "submit" }, ["Register"]);
  const problem = errorLine();
  const form = el("form", { class: "form card" }, [
    el("h2", {}, ["Register"]),
    username,
    space(),
    email,
    space(),
    password,
    space(),
    submit,
    problem,
  ]);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    submit.disabled = true;
    problem.textContent = "";
    try {
      await registerUser(username.value, email.value, password.value);
      const session = await login(username.value, password.value);
      saveSession(session);
      router.go("dashboard");
    } catch (error) {
      problem.textContent = describe(error);
    } finally {
      submit.disabled = false;
    }
  });
  const toLogin = el("a", { href: "#/login", class: "switch-link" }, ["Have an account? Log in"]);
  root.replaceChildren(form, toLogin);
}

// -- Dashboard -----------------------------------------------------------------

function breadcrumb(...parts: string[]): HTMLElement {
  const items = parts.flatMap((part, index) =>
    index === 0 ? [el("span", {}, [part])] : [el("span", { class: "crumb-sep" }, ["/"]), el("span", {}, [part])],
  );
  return el("nav", { class: "breadcrumb" }, items);
}

export function renderDashboard(root: HTMLElement, router: Router): void {
  const session = loadSession();
  if (!session) return router.go("login");
  let start = 0;

  const table = el("table", { class: "table" });
  const status = el("p", { class: "table-status" });
  const prev = el("button", { class: "button button-secondary" }, ["Previous"]);
  const next = el("button", { class: "button button-secondary" }, ["Next"]);
  const uploadButton = el("button", { class: "button" }, ["Upload a card"]);
  uploadButton.addEventListener("click", () => router.go("upload"));
  const logout = el("button", { class: "button button-secondary" }, ["Log out"]);
  logout.addEventListener("click", () => {
    clearSession();
    router.go("login");
  });

  async function refresh(): Promise<void> {
    status.textContent = "Loading…";
    let rows: CardRow[];
    try {
      rows = await fetchCards(session!, PAGE_SIZE, start);
    } catch (error) {
      status.textContent = describe(error);
      return;
    }
    const header = el("tr", {}, []);
    for (const column of ["Identifier", "Name", "Kind", "Status", "Uploaded", "Verified"]) {
      header.append(el("th", {}, [column]));
    }
    const body = rows.map((row) =>
      el("tr", {}, [
        el("td", {}, [row.identifier ?? "—"]),
        el("td", {}, [row.name ?? "—"]),
        el("td", {}, [row.kind ?? "—"]),
        el("td", { class: `status status-${row.statusCode.toLowerCase()}` }, [row.statusCode]),
        el("td", {}, [row.uploadedAt ?? "—"]),
        el("td", {}, [row.verifiedAt ?? "—"]),
      ]),
    );
    table.replaceChildren(header, ...body);
    status.textContent = rows.length === 0 ? "No cards on this page." : `${rows.length} card(s)`;
    prev.disabled = start === 0;
    next.disabled = rows.length < PAGE_SIZE;
  }

  prev.addEventListener("click", () => {
    start = Math.max(0, start - PAGE_SIZE);
    void refresh();
  });
  next.addEventListener("click", () => {
    start += PAGE_SIZE;
    void refresh();
  });

  const layout = el("div", { class: "layout" }, [
    breadcrumb("Home", "Dashboard"),
    el("div", { class: "toolbar" }, [uploadButton, logout]),
    el("h2", {}, [`Cards uploaded by ${session.username}`]),
    table,
    status,
    el("div", { class: "pager" }, [prev, next]),
  ]);
  root.replaceChildren(layout);
  void refresh();
}

// -- Upload --------------------------------------------------------------------

export function renderUpload(root: HTMLElement, router: Router): void {
  const session = loadSession();
  if (!session) return router.go("login");

  const file = el("input", { class: "input", type: "file", accept: "image/png,image/jpeg" });
  const kind = el("select", { class: "input", name: "kind" });
  for (const option of ["NATIONAL_ID", "PASSPORT", "DRIVER_LICENSE"]) {
    kind.append(el("option", { value: option }, [option]));
  }
  const identifier = input("identifier", "text", "document number");
  const name = input("name", "text", "holder name");
  const expiry = input("expiryDate", "date", "expiry date", false);
  const faceTop = input("faceTop", "number", "face top px", false);
  const faceLeft = input("faceLeft", "number", "face left px", false);
  const faceWidth = input("faceWidth", "number", "face width px", false);
  const faceHeight = input("faceHeight", "number", "face height px", false);

  const progress = el("progress", { class: "progress", max: "1", value: "0" }) as HTMLProgressElement;
  const problem = errorLine();
  const outcome = el("p", { class: "upload-outcome" });
  const submit = el("button", { class: "button", type: "submit" }, ["Upload"]);

  const form = el("form", { class: "form card" }, [
    el("h2", {}, ["Upload an ID card"]),
    file,
    space(),
    kind,
    space(),
    identifier,
    space(),
    name,
    space(),
    expiry,
    space(),
    el("div", { class: "face-box-row" }, [faceTop, faceLeft, faceWidth, faceHeight]),
    space(),
    progress,
    submit,
    problem,
    outcome,
  ]);

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    problem.textContent = "";
    outcome.textContent = "";
    const chosen = file.files?.[0];
    if (!chosen) {
      problem.textContent = "choose a jpeg or png file first";
      return;
    }
    submit.disabled = true;
    try {
      const asset = await uploadFile(session!, chosen, chosen.name, {
        onProgress: (fraction) => {
          progress.value = fraction;
        },
      });
      const declared: DeclaredFields = {
        kind: kind.value,
        identifier: identifier.value,
        name: name.value,
      };
      if (expiry.value) declared.expiryDate = expiry.value;
      if (faceTop.value) declared.faceTop = Number(faceTop.value);
      if (faceLeft.value) declared.faceLeft = Number(faceLeft.value);
      if (faceWidth.value) declared.faceWidth = Number(faceWidth.value);
      if (faceHeight.value) declared.faceHeight = Number(faceHeight.value);
      const card = await createCard(session!, asset.id, declared);
      outcome.textContent = `Card ${card.id}: ${card.statusCode}`;
      const poll = pollCardStatus(session!, card.id, POLL_INTERVAL_MS, (current) => {
        outcome.textContent = `Card ${card.id}: ${current}`;
      });
      router.beforeLeave(() => poll.cancel());
      const final = await poll.done;
      outcome.textContent = `Card ${card.id}: ${final}${TERMINAL_STATUSES.has(final) ? " (final)" : ""}`;
    } catch (error) {
      if (error instanceof UploadError) {
        problem.textContent = error.kind === "too-large" ? "file too large" : error.message;
      } else if (error instanceof GqlError && error.violations.length > 0) {
        problem.textContent = error.violations.map((v) => `${v.field}: ${v.reason}`).join("; ");
      } else {
        problem.textContent = describe(error);
      }
    } finally {
      submit.disabled = false;
    }
  });

  const layout = el("div", { class: "layout" }, [
    breadcrumb("Home", "Dashboard", "Upload"),
    form,
    el("button", { class: "button button-secondary" }, ["Back to dashboard"]),
  ]);
  (layout.lastChild as HTMLElement).addEventListener("click", () => router.go("dashboard"));
  root.replaceChildren(layout);
}

export type { Session };

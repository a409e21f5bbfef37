/** Bootstrap: base URL from ?api=, falling back to the service default. */

import { ApiClient } from "./api.js";
import { AnnotationSession } from "./state.js";
import { AnnotationView } from "./view.js";

const DEFAULT_API = "http://127.0.0.1:8787";

export function resolveBaseUrl(search: string): string {
  const params = new URLSearchParams(search);
  const fromQuery = params.get("api");
  if (fromQuery) return fromQuery.replace(/\/+$/, "");
  return DEFAULT_API;
}

export function bootstrap(root: HTMLElement, baseUrl: string): AnnotationSession {
  const session = new AnnotationSession(new ApiClient(baseUrl));
  new AnnotationView(root, session);
  return session;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrap(
    document.getElementById("app")!,
    resolveBaseUrl(window.location.search),
  );
}

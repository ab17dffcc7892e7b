import { ApiClient } from "./api";
import { boot } from "./app";

// Same-origin when served behind the API, ?api= or the default service port
// during development.
const params = new URLSearchParams(location.search);
const base =
  params.get("api") ??
  (location.port === "5173" ? "http://127.0.0.1:8734" : location.origin);

const root = document.getElementById("app")!;
boot(root, new ApiClient(base), (url) => new WebSocket(url)).catch((err) => {
  root.textContent = `failed to reach the session service at ${base}: ${err}`;
});

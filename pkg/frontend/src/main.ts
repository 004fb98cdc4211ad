import { ReviewApi } from "./api.js";
import { initApp } from "./app.js";

// Same-origin deployment: the review service mounts this bundle at / and
// its API under /api, so no base URL is needed.
initApp(document, new ReviewApi(""));

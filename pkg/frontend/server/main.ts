// Standalone fixture server for offline dashboard demos:
//   npm run build && node dist/server/main.js [port]

import { startFixtureServer } from "./fixtureServer.js";

const port = Number(process.argv[2] ?? 8048);
const server = await startFixtureServer(port);
console.log(`fixture gateway replaying recorded corpus on ${server.url}`);
console.log("sessions: bearer fixture-token-<role> "
  + "(agent, fleet_manager, supervisor, financier, admin, ...)");

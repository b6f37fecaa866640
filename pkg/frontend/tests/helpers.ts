/** Fixture loading and fetch mocking.
 *
 * Fixtures are the exact bytes the Python service produced (recorded by
 * scripts/record_fixtures.py), so every assertion here is against the true
 * wire format rather than a hand-written imitation of it.
 */

import { readFileSync } from "node:fs";
import { setFetcher } from "../src/api.js";

export function fixtureRaw(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf-8");
}

export function fixture<T>(name: string): T {
  return JSON.parse(fixtureRaw(name)) as T;
}

export interface Captured {
  url: string;
  method: string;
  body: string | null;
}

export interface Route {
  body: string;
  status?: number;
}

/** Route fetch by "METHOD url" to canned bodies; records every request made. */
export function mockFetch(routes: Record<string, Route>): Captured[] {
  const captured: Captured[] = [];
  setFetcher(async (input, init) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const route = routes[`${method} ${url}`];
    if (!route) throw new Error(`no fixture route for ${method} ${url}`);
    captured.push({ url, method, body: (init?.body as string) ?? null });
    return new Response(route.body, {
      status: route.status ?? 200,
      headers: { "content-type": "application/json" },
    });
  });
  return captured;
}

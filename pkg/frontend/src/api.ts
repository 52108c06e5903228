/** Typed client for the session service. Pure HTTP, no algorithm logic. */

export interface TreeJson {
  id: number;
  label: string | null;
  children: TreeJson[];
}

export interface TreeView {
  newick: string;
  json: TreeJson;
  queries: number;
  placed: number;
  total: number;
  done: boolean;
  mode: string;
}

export type QueryResponse = { triplet: string[]; done?: false } | { done: true };

export interface AnswerResponse {
  state: "awaiting_answer" | "done";
  placed: number;
  total: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && body.detail) detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    } catch {
      /* keep statusText */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class SessionApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(elements: string[], mode: string, p?: number, delta?: number): Promise<{ id: string; done: boolean }> {
    const body: Record<string, unknown> = { elements, mode };
    if (p !== undefined) body.p = p;
    if (delta !== undefined) body.delta = delta;
    const resp = await this.fetchFn(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return expectJson(resp);
  }

  async nextQuery(id: string): Promise<QueryResponse> {
    return expectJson(await this.fetchFn(this.url(`/sessions/${id}/query`)));
  }

  async answer(id: string, pair: [string, string]): Promise<AnswerResponse> {
    const resp = await this.fetchFn(this.url(`/sessions/${id}/answer`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pair }),
    });
    return expectJson(resp);
  }

  async tree(id: string): Promise<TreeView> {
    return expectJson(await this.fetchFn(this.url(`/sessions/${id}/tree`)));
  }
}

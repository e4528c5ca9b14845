//! Minimal robots.txt evaluation: user-agent groups, Allow/Disallow with
//! `*` and `$`, longest match wins and Allow wins ties.

#[derive(Debug, Clone, Default)]
pub struct Robots {
    groups: Vec<Group>,
}

#[derive(Debug, Clone, Default)]
struct Group {
    agents: Vec<String>,
    rules: Vec<(bool, String)>,
}

impl Robots {
    pub fn parse(text: &str) -> Robots {
        let mut groups: Vec<Group> = Vec::new();
        let mut in_agents = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((field, value)) = line.split_once(':') else { continue };
            let field = field.trim().to_ascii_lowercase();
            let value = value.trim();
            match field.as_str() {
                "user-agent" => {
                    if !in_agents {
                        groups.push(Group::default());
                        in_agents = true;
                    }
                    groups.last_mut().expect("pushed").agents.push(value.to_ascii_lowercase());
                }
                "allow" | "disallow" => {
                    in_agents = false;
                    if let Some(group) = groups.last_mut() {
                        if !value.is_empty() {
                            group.rules.push((field == "allow", value.to_string()));
                        }
                    }
                }
                _ => {}
            }
        }
        Robots { groups }
    }

    /// Whether `user_agent` may fetch `path` (path plus optional query).
    pub fn allows(&self, user_agent: &str, path: &str) -> bool {
        let token = user_agent.split('/').next().unwrap_or(user_agent).trim().to_ascii_lowercase();
        let specific: Vec<&Group> = self
            .groups
            .iter()
            .filter(|g| g.agents.iter().any(|a| a != "*" && !token.is_empty() && token.contains(a.as_str())))
            .collect();
        let groups = if specific.is_empty() {
            self.groups.iter().filter(|g| g.agents.iter().any(|a| a == "*")).collect()
        } else {
            specific
        };
        let mut best: Option<(usize, bool)> = None;
        for (allow, pattern) in groups.iter().flat_map(|g| g.rules.iter()) {
            if pattern_matches(pattern, path) {
                let len = pattern.len();
                best = match best {
                    Some((l, a)) if l > len || (l == len && a) => Some((l, a)),
                    _ => Some((len, *allow)),
                };
            }
        }
        best.is_none_or(|(_, allow)| allow)
    }
}

fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (pattern, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let parts: Vec<&str> = pattern.split('*').collect();
    let mut pos = 0;
    for (i, part) in parts.iter().enumerate() {
        if i == 0 {
            if !path.starts_with(part) {
                return false;
            }
            pos = part.len();
        } else if i == parts.len() - 1 && anchored {
            return path.len() >= pos + part.len() && path.ends_with(part);
        } else {
            match path[pos..].find(part) {
                Some(j) => pos += j + part.len(),
                None => return false,
            }
        }
    }
    !anchored || pos == path.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROBOTS: &str = "
User-agent: *
Disallow: /private
Allow: /private/menu
Disallow: /*.pdf$

User-agent: BadBot
Disallow: /
";

    #[test]
    fn group_selection_and_longest_match() {
        let robots = Robots::parse(ROBOTS);
        assert!(robots.allows("BizChatBot/1.0", "/"));
        assert!(!robots.allows("BizChatBot/1.0", "/private/ledger"));
        assert!(robots.allows("BizChatBot/1.0", "/private/menu"));
        assert!(!robots.allows("BizChatBot/1.0", "/files/plan.pdf"));
        assert!(robots.allows("BizChatBot/1.0", "/files/plan.pdf?x=1"));
        assert!(!robots.allows("BadBot/2.0", "/"));
    }

    #[test]
    fn empty_file_allows_everything() {
        assert!(Robots::parse("").allows("x", "/anything"));
        assert!(Robots::parse("User-agent: *\nDisallow:\n").allows("x", "/a"));
    }
}

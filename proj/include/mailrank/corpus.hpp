#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mailrank::corpus {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One message as read from disk: ordered header pairs and the raw body,
/// split at the first blank line.
struct RawEmail {
    std::string source_path;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

/// One body segment: the main body (level 0) or a quotation level.
struct EmailDocument {
    std::string doc_id;
    std::string owner_email_id;
    int level = 0;
    std::string text;
    std::string fingerprint;
};

struct Email {
    std::string email_id;
    std::string sender;
    std::vector<std::string> recipients;
    std::int64_t date = 0;          // epoch seconds, UTC; 0 when absent
    std::string date_raw;
    std::string raw_subject;
    std::string norm_subject;
    std::vector<EmailDocument> documents;   // index = level, [0] is the main body
    std::string folder;
    std::string source_path;
};

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
    return out;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (ascii_lower(a[i]) != ascii_lower(b[i])) return false;
    return true;
}

/// Decodes bytes as UTF-8, replacing every invalid sequence with U+FFFD.
/// Ingestion never aborts on a bad byte.
inline std::string decode_utf8_lossy(std::string_view bytes) {
    static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
    std::string out;
    out.reserve(bytes.size());
    size_t i = 0;
    while (i < bytes.size()) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        size_t need = 0;
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            need = 1;
        } else if ((c & 0xF0) == 0xE0) {
            need = 2;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            need = 3;
        } else {
            out.append(kReplacement);
            ++i;
            continue;
        }
        bool ok = i + need < bytes.size();
        for (size_t k = 1; ok && k <= need; ++k)
            ok = (static_cast<unsigned char>(bytes[i + k]) & 0xC0) == 0x80;
        if (ok) {
            out.append(bytes.substr(i, need + 1));
            i += need + 1;
        } else {
            out.append(kReplacement);
            ++i;
        }
    }
    return out;
}

/// Strips reply/forward prefixes (Re:, Fw:, Fwd:) until none remains,
/// then casefolds and trims.
inline std::string normalize_subject(std::string_view raw_subject) {
    std::string s = trim(raw_subject);
    for (;;) {
        std::string low = to_lower(s);
        size_t cut = 0;
        if (low.rfind("re:", 0) == 0) cut = 3;
        else if (low.rfind("fwd:", 0) == 0) cut = 4;
        else if (low.rfind("fw:", 0) == 0) cut = 3;
        if (cut == 0) break;
        s = trim(std::string_view(s).substr(cut));
    }
    return to_lower(s);
}

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

// Number of leading ">" markers; spaces/tabs may surround them.
inline int quote_depth(std::string_view line, size_t* content_start = nullptr) {
    size_t i = 0;
    int depth = 0;
    size_t after = 0;
    while (i < line.size()) {
        if (line[i] == ' ' || line[i] == '\t') {
            ++i;
        } else if (line[i] == '>') {
            ++depth;
            ++i;
            after = i;
        } else {
            break;
        }
    }
    if (after < line.size() && line[after] == ' ') ++after;  // the "> " convention
    if (content_start) *content_start = depth > 0 ? after : 0;
    return depth;
}

// "-----Original Message-----" or "---- Forwarded by ... ----"
inline bool is_separator_line(std::string_view line) {
    std::string low = to_lower(trim(line));
    if (low.size() < 4 || low[0] != '-' || low[1] != '-') return false;
    if (low.find("original message") != std::string::npos)
        return low.ends_with("--");
    return low.find("forwarded by") != std::string::npos;
}

inline bool is_quoted_header_line(std::string_view line) {
    static constexpr std::string_view kNames[] = {"from:", "sent:", "to:", "subject:"};
    std::string low = to_lower(trim(line));
    for (auto name : kNames)
        if (low.rfind(name, 0) == 0) return true;
    return false;
}

}  // namespace detail

/// Canonical content key: lowercased, quote markers stripped per line,
/// whitespace runs collapsed, trimmed. Equal fingerprints mean "the same
/// content" everywhere downstream.
inline std::string fingerprint(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (const auto& line : detail::split_lines(text)) {
        size_t content = 0;
        detail::quote_depth(line, &content);
        std::string_view rest = std::string_view(line).substr(content);
        for (char c : rest) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!out.empty() && out.back() != ' ') out.push_back(' ');
            } else {
                out.push_back(ascii_lower(c));
            }
        }
        if (!out.empty() && out.back() != ' ') out.push_back(' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

/// Splits a body into the sender's own text (segment 0) and quotation
/// segments. Quotation patterns and embedded header blocks are removed from
/// the returned texts. Always returns at least one segment; segments with no
/// surviving text come back empty.
inline std::vector<std::string> segment_body(std::string_view body) {
    const std::vector<std::string> lines = detail::split_lines(body);
    const size_t n = lines.size();

    std::vector<int> depth(n, 0);
    std::vector<size_t> content(n, 0);
    std::vector<bool> sep(n, false), hdr(n, false);
    for (size_t i = 0; i < n; ++i) {
        depth[i] = detail::quote_depth(lines[i], &content[i]);
        std::string_view stripped = std::string_view(lines[i]).substr(content[i]);
        sep[i] = detail::is_separator_line(stripped);
        hdr[i] = detail::is_quoted_header_line(stripped);
    }
    // A header line only acts as a boundary/pattern when part of a block of
    // >= 2 consecutive header lines at the same quote depth.
    std::vector<bool> hdr_block(n, false);
    for (size_t i = 0; i < n; ++i) {
        if (!hdr[i]) continue;
        bool prev = i > 0 && hdr[i - 1] && depth[i - 1] == depth[i];
        bool next = i + 1 < n && hdr[i + 1] && depth[i + 1] == depth[i];
        hdr_block[i] = prev || next;
    }

    std::vector<std::string> segments(1);
    int sep_level = 0;
    size_t i = 0;
    auto swallow_header_block = [&](size_t from) {
        size_t j = from;
        while (j < n) {
            std::string_view stripped = std::string_view(lines[j]).substr(content[j]);
            bool blank = trim(stripped).empty();
            bool continuation = !blank && !stripped.empty() &&
                                (stripped[0] == ' ' || stripped[0] == '\t');
            if (hdr[j] || continuation || (blank && j + 1 < n && hdr[j + 1])) {
                ++j;
            } else {
                break;
            }
        }
        return j;
    };
    while (i < n) {
        if (depth[i] == 0 && sep[i]) {
            ++sep_level;
            i = swallow_header_block(i + 1);
            continue;
        }
        if (depth[i] == 0 && hdr_block[i]) {
            ++sep_level;
            i = swallow_header_block(i);
            continue;
        }
        if (depth[i] > 0 && (sep[i] || hdr_block[i])) {
            ++i;  // quoted pattern line: removed, no level change
            continue;
        }
        int level = sep_level + depth[i];
        if (static_cast<int>(segments.size()) <= level)
            segments.resize(static_cast<size_t>(level) + 1);
        auto& seg = segments[static_cast<size_t>(level)];
        if (!seg.empty()) seg.push_back('\n');
        seg.append(std::string_view(lines[i]).substr(content[i]));
        ++i;
    }
    for (auto& seg : segments) seg = trim(seg);
    return segments;
}

/// Parses an RFC-2822-style date ("Wed, 13 Dec 2000 08:22:00 -0800 (PST)")
/// to epoch seconds UTC. Returns nullopt when the text is unusable.
inline std::optional<std::int64_t> parse_date(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string tok;
    if (!(in >> tok)) return std::nullopt;
    if (!tok.empty() && tok.back() == ',') {
        if (!(in >> tok)) return std::nullopt;  // skip weekday
    }
    auto is_number = [](const std::string& s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c));
        });
    };
    if (!is_number(tok)) return std::nullopt;
    int day = std::stoi(tok);

    static constexpr std::string_view kMonths[] = {"jan", "feb", "mar", "apr",
                                                   "may", "jun", "jul", "aug",
                                                   "sep", "oct", "nov", "dec"};
    std::string mon;
    if (!(in >> mon)) return std::nullopt;
    mon = to_lower(mon).substr(0, 3);
    int month = 0;
    for (int m = 0; m < 12; ++m)
        if (mon == kMonths[m]) month = m + 1;
    if (month == 0) return std::nullopt;

    std::string year_s;
    if (!(in >> year_s) || !is_number(year_s)) return std::nullopt;
    int year = std::stoi(year_s);
    if (year < 100) year += year < 70 ? 2000 : 1900;

    int hh = 0, mm = 0, ss = 0;
    std::string clock;
    if (in >> clock) {
        if (std::sscanf(clock.c_str(), "%d:%d:%d", &hh, &mm, &ss) < 2)
            hh = mm = ss = 0;
    }
    std::int64_t zone = 0;
    std::string zone_s;
    if (in >> zone_s && zone_s.size() == 5 && (zone_s[0] == '+' || zone_s[0] == '-')) {
        int zh = (zone_s[1] - '0') * 10 + (zone_s[2] - '0');
        int zm = (zone_s[3] - '0') * 10 + (zone_s[4] - '0');
        zone = (zh * 3600 + zm * 60) * (zone_s[0] == '-' ? -1 : 1);
    }

    // days-from-civil, proleptic Gregorian
    std::int64_t y = year;
    y -= month <= 2;
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    std::int64_t yoe = y - era * 400;
    std::int64_t doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    std::int64_t days = era * 146097 + doe - 719468;
    return days * 86400 + hh * 3600 + mm * 60 + ss - zone;
}

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Pulls addresses out of "Name <a@b>, c@d" style header values.
inline std::vector<std::string> parse_address_list(std::string_view value) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        std::string t = trim(cur);
        cur.clear();
        if (t.empty()) return;
        size_t lt = t.find('<'), gt = t.find('>');
        if (lt != std::string::npos && gt != std::string::npos && gt > lt)
            t = trim(std::string_view(t).substr(lt + 1, gt - lt - 1));
        if (!t.empty()) out.push_back(to_lower(t));
    };
    for (char c : value) {
        if (c == ',' || c == ';') flush();
        else cur.push_back(c);
    }
    flush();
    return out;
}

}  // namespace detail

/// Splits decoded text into a RawEmail. Throws ParseError when no blank-line
/// header/body separator exists.
inline RawEmail split_raw(std::string_view text, std::string source_path) {
    RawEmail raw;
    raw.source_path = std::move(source_path);
    size_t pos = 0;
    bool separated = false;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line = nl == std::string_view::npos
                                    ? text.substr(pos)
                                    : text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            separated = true;
            raw.body = nl == std::string_view::npos ? "" : std::string(text.substr(nl + 1));
            break;
        }
        if ((line[0] == ' ' || line[0] == '\t') && !raw.headers.empty()) {
            raw.headers.back().second.append(" ").append(trim(line));
        } else {
            size_t colon = line.find(':');
            if (colon == std::string_view::npos) {
                if (!raw.headers.empty())
                    raw.headers.back().second.append(" ").append(trim(line));
                // else: junk before the first header, ignored
            } else {
                raw.headers.emplace_back(trim(line.substr(0, colon)),
                                         trim(line.substr(colon + 1)));
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (!separated)
        throw ParseError("no blank-line header/body separator in " + raw.source_path);
    return raw;
}

inline std::optional<std::string> header_value(const RawEmail& raw, std::string_view name) {
    for (const auto& [k, v] : raw.headers)
        if (iequals(k, name)) return v;
    return std::nullopt;
}

/// Full parse: decode, split, normalize subject, segment body, fingerprint.
/// Missing Date -> epoch zero; missing From -> empty sender; missing
/// Message-ID -> content-hash identity.
inline Email parse_email(std::string_view bytes, std::string source_path = "<memory>") {
    std::string text = decode_utf8_lossy(bytes);
    RawEmail raw = split_raw(text, std::move(source_path));

    Email e;
    e.source_path = raw.source_path;
    if (auto from = header_value(raw, "From")) {
        auto addrs = detail::parse_address_list(*from);
        if (!addrs.empty()) e.sender = addrs.front();
    }
    for (auto name : {"To", "Cc", "Bcc"}) {
        if (auto v = header_value(raw, name)) {
            auto addrs = detail::parse_address_list(*v);
            e.recipients.insert(e.recipients.end(), addrs.begin(), addrs.end());
        }
    }
    if (auto d = header_value(raw, "Date")) {
        e.date_raw = *d;
        e.date = parse_date(*d).value_or(0);
    }
    if (auto s = header_value(raw, "Subject")) e.raw_subject = *s;
    e.norm_subject = normalize_subject(e.raw_subject);

    if (auto mid = header_value(raw, "Message-ID")) {
        e.email_id = trim(*mid);
    }
    if (e.email_id.empty()) {
        std::uint64_t h = detail::fnv1a64(e.date_raw);
        h = detail::fnv1a64(e.sender, h);
        h = detail::fnv1a64(fingerprint(raw.body), h);
        char buf[32];
        std::snprintf(buf, sizeof buf, "<h%016llx>", static_cast<unsigned long long>(h));
        e.email_id = buf;
    }

    auto segments = segment_body(raw.body);
    for (size_t level = 0; level < segments.size(); ++level) {
        EmailDocument doc;
        doc.owner_email_id = e.email_id;
        doc.level = static_cast<int>(level);
        doc.text = segments[level];
        doc.fingerprint = fingerprint(doc.text);
        doc.doc_id = e.email_id + "/" + std::to_string(level);
        e.documents.push_back(std::move(doc));
    }
    return e;
}

/// Lists email files under a maildir-style tree, restricted to the given
/// folder names (any path component match). Sorted for determinism.
inline std::vector<std::filesystem::path> list_maildir(
    const std::filesystem::path& root, const std::vector<std::string>& folders) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (!fs::exists(root)) return files;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file()) continue;
        if (!folders.empty()) {
            bool keep = false;
            for (auto part = it->path().parent_path(); !part.empty() && part != root;
                 part = part.parent_path()) {
                for (const auto& f : folders)
                    if (part.filename() == f) keep = true;
                if (part == part.parent_path()) break;
            }
            if (!keep) continue;
        }
        files.push_back(it->path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Folder tag for an email file: the path component directly above it
/// ("inbox", "sent_items", ...).
inline std::string folder_of(const std::filesystem::path& file) {
    auto parent = file.parent_path().filename().string();
    // Enron folders are often split as inbox/1., sent_items/12. etc.; a
    // purely numeric component means "look one level higher".
    if (!parent.empty() && std::all_of(parent.begin(), parent.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
        }))
        parent = file.parent_path().parent_path().filename().string();
    return parent;
}

}  // namespace mailrank::corpus

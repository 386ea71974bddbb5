//! Densities given as expressions in the coordinates `x0, x1, ...`.
//!
//! Grammar: numbers, `pi`, `x<k>`, `+ - * / ^`, comparisons (`<`, `<=`, `>`, `>=`, `==`, `!=`,
//! giving 1 or 0), parentheses and the functions `sqrt exp ln abs sin cos tan min max if`.

use nom::branch::alt;
use nom::bytes::complete::{tag, take_while, take_while1};
use nom::character::complete::{char, multispace0};
use nom::combinator::{all_consuming, map, opt, recognize};
use nom::multi::{many0, separated_list1};
use nom::number::complete::double;
use nom::sequence::{delimited, pair, preceded};
use nom::{IResult, Parser};

use crate::config::CliError;

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Num(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Cmp(&'static str, Box<Expr>, Box<Expr>),
    Call(&'static str, Vec<Expr>),
}

const FUNCTIONS: [(&str, usize); 10] = [
    ("sqrt", 1),
    ("exp", 1),
    ("ln", 1),
    ("abs", 1),
    ("sin", 1),
    ("cos", 1),
    ("tan", 1),
    ("min", 2),
    ("max", 2),
    ("if", 3),
];

fn ws<'a, O>(p: impl Parser<&'a str, Output = O, Error = nom::error::Error<&'a str>>) -> impl Parser<&'a str, Output = O, Error = nom::error::Error<&'a str>> {
    delimited(multispace0, p, multispace0)
}

fn ident(i: &str) -> IResult<&str, &str> {
    let head = take_while1(|c: char| c.is_ascii_alphabetic());
    ws(recognize(pair(head, take_while(|c: char| c.is_ascii_alphanumeric())))).parse(i)
}

fn name_or_call(i: &str) -> IResult<&str, Expr> {
    let (rest, name) = ident(i)?;
    let (rest, args) = opt(delimited(ws(char('(')), separated_list1(ws(char(',')), expr), ws(char(')')))).parse(rest)?;
    let fail = || nom::Err::Failure(nom::error::Error::new(i, nom::error::ErrorKind::Verify));
    match args {
        Some(args) => {
            let &(f, arity) = FUNCTIONS.iter().find(|(f, _)| *f == name).ok_or_else(fail)?;
            if args.len() != arity {
                return Err(fail());
            }
            Ok((rest, Expr::Call(f, args)))
        }
        None if name == "pi" => Ok((rest, Expr::Num(std::f64::consts::PI))),
        None => match name.strip_prefix('x').and_then(|k| k.parse().ok()) {
            Some(k) => Ok((rest, Expr::Coord(k))),
            None => Err(fail()),
        },
    }
}

fn atom(i: &str) -> IResult<&str, Expr> {
    alt((map(ws(double), Expr::Num), name_or_call, delimited(ws(char('(')), expr, ws(char(')'))))).parse(i)
}

fn power(i: &str) -> IResult<&str, Expr> {
    let (rest, base) = atom(i)?;
    match opt(preceded(ws(char('^')), unary)).parse(rest)? {
        (rest, Some(e)) => Ok((rest, Expr::Bin('^', Box::new(base), Box::new(e)))),
        (rest, None) => Ok((rest, base)),
    }
}

fn unary(i: &str) -> IResult<&str, Expr> {
    alt((map(preceded(ws(char('-')), unary), |e| Expr::Neg(Box::new(e))), power)).parse(i)
}

fn fold(first: Expr, rest: Vec<(char, Expr)>) -> Expr {
    rest.into_iter().fold(first, |acc, (op, e)| Expr::Bin(op, Box::new(acc), Box::new(e)))
}

fn product(i: &str) -> IResult<&str, Expr> {
    let (i, first) = unary(i)?;
    let (i, rest) = many0(pair(ws(alt((char('*'), char('/')))), unary)).parse(i)?;
    Ok((i, fold(first, rest)))
}

fn sum(i: &str) -> IResult<&str, Expr> {
    let (i, first) = product(i)?;
    let (i, rest) = many0(pair(ws(alt((char('+'), char('-')))), product)).parse(i)?;
    Ok((i, fold(first, rest)))
}

fn expr(i: &str) -> IResult<&str, Expr> {
    let (i, lhs) = sum(i)?;
    let ops = alt((tag("<="), tag(">="), tag("=="), tag("!="), tag("<"), tag(">")));
    match opt(pair(ws(ops), sum)).parse(i)? {
        (i, Some((op, rhs))) => {
            let op = ["<=", ">=", "==", "!=", "<", ">"].into_iter().find(|o| *o == op).expect("matched above");
            Ok((i, Expr::Cmp(op, Box::new(lhs), Box::new(rhs))))
        }
        (i, None) => Ok((i, lhs)),
    }
}

impl Expr {
    fn eval(&self, x: &[f64]) -> Option<f64> {
        let truth = |b: bool| if b { 1.0 } else { 0.0 };
        Some(match self {
            Expr::Num(v) => *v,
            Expr::Coord(k) => *x.get(*k)?,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Expr::Cmp(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                truth(match *op {
                    "<" => a < b,
                    "<=" => a <= b,
                    ">" => a > b,
                    ">=" => a >= b,
                    "==" => a == b,
                    _ => a != b,
                })
            }
            Expr::Call("if", args) => {
                if args[0].eval(x)? != 0.0 {
                    args[1].eval(x)?
                } else {
                    args[2].eval(x)?
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(x)?;
                match *f {
                    "sqrt" => a.sqrt(),
                    "exp" => a.exp(),
                    "ln" => a.ln(),
                    "abs" => a.abs(),
                    "sin" => a.sin(),
                    "cos" => a.cos(),
                    "tan" => a.tan(),
                    "min" => a.min(args[1].eval(x)?),
                    _ => a.max(args[1].eval(x)?),
                }
            }
        })
    }
}

pub struct Density {
    source: String,
    tree: Expr,
}

impl Density {
    pub fn parse(source: &str) -> Result<Self, CliError> {
        match all_consuming(expr).parse(source) {
            Ok((_, tree)) => Ok(Density { source: source.into(), tree }),
            Err(e) => Err(CliError::Usage(format!("density `{source}` does not parse ({e})"))),
        }
    }

    /// Value at `x`; fails when the expression names a coordinate `x` does not have.
    pub fn eval(&self, x: &[f64]) -> Result<f64, CliError> {
        self.tree
            .eval(x)
            .ok_or_else(|| CliError::Usage(format!("density `{}` uses a coordinate beyond x{}", self.source, x.len().saturating_sub(1))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_and_constants() {
        let f = Density::parse("1 + x0 * x1").unwrap();
        assert_eq!(f.eval(&[2.0, 3.0]).unwrap(), 7.0);
        let g = Density::parse("if(x0 < 0.5, 3, 0.5)").unwrap();
        assert_eq!(g.eval(&[0.2]).unwrap(), 3.0);
        assert_eq!(g.eval(&[0.7]).unwrap(), 0.5);
        assert!(Density::parse("x0 +").is_err());
        assert!(Density::parse("y + 1").is_err());
        assert!(Density::parse("max(1)").is_err());
        assert!(Density::parse("x3").unwrap().eval(&[0.0]).is_err());
    }

    #[test]
    fn precedence() {
        let at = |s: &str| Density::parse(s).unwrap().eval(&[2.0]).unwrap();
        assert_eq!(at("1 + 2 * 3"), 7.0);
        assert_eq!(at("(1 + 2) * 3"), 9.0);
        assert_eq!(at("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(at("-x0 ^ 2"), -4.0);
        assert_eq!(at("8 / 2 / 2"), 2.0);
        assert_eq!(at("10 - 2 - 3"), 5.0);
        assert_eq!(at("x0 >= 2"), 1.0);
        assert_eq!(at("sqrt(x0 * 8) + max(1, pi) - abs(-1)"), 3.0 + std::f64::consts::PI);
        assert_eq!(at("exp(ln(x0))"), 2.0);
    }
}
